"""Window sums, means and sums of squares.

Two interchangeable routes are provided: direct accumulation of every window
(``window_sums_direct``) and four-corner lookups into an integral image
(``window_sums_integral``). Rows of the integral image are built with a
segmented two-layer Kogge-Stone scan.

Windows are clamped to the image: out-of-range coordinates replicate the
nearest border pixel, so every window holds exactly ``(2r+1)**2`` samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image_io import as_gray_image

WARP_SIZE = 32

# Largest side length served by the direct method under ``auto`` selection.
DIRECT_MAX_SIDE = 7


@dataclass(frozen=True)
class WindowStats:
    """Per-pixel window sum, sum of squares and mean for radius ``r``."""

    r: int
    sum: np.ndarray
    sum_sq: np.ndarray
    mean: np.ndarray

    @property
    def side(self):
        return 2 * self.r + 1

    @property
    def area(self):
        return self.side * self.side

    @property
    def height(self):
        return self.sum.shape[0]

    @property
    def width(self):
        return self.sum.shape[1]


def _accumulator(img):
    """Integer accumulators for integer-valued images, float64 otherwise."""
    if np.all(img == np.floor(img)):
        return img.astype(np.int64)
    return img.astype(np.float64)


def _kogge_stone(block):
    """Inclusive Kogge-Stone scan along the last axis (log-depth shift-adds)."""
    out = block.copy()
    n = out.shape[-1]
    shift = 1
    while shift < n:
        prev = out.copy()
        out[..., shift:] += prev[..., :-shift]
        shift *= 2
    return out


def _scan_rows(rows, segment_len):
    """Scan every row of a 2-D array; rows are independent lanes.

    Each row is consumed ``segment_len`` elements at a time. Inside a segment
    the elements are split into warps of 32 lanes which scan themselves, then
    warp totals propagate warp ``i`` -> ``i + 2**(t-1)`` with an exclusive
    Kogge-Stone pass. The running total of earlier segments is carried in.
    """
    if segment_len < 1:
        raise ValueError(f"segment_len must be >= 1, got {segment_len}")
    n_rows, n = rows.shape
    out = np.empty_like(rows)
    carry = np.zeros(n_rows, dtype=rows.dtype)
    for start in range(0, n, segment_len):
        seg = rows[:, start:start + segment_len]
        m = seg.shape[1]
        n_warps = -(-m // WARP_SIZE)
        lanes = np.zeros((n_rows, n_warps * WARP_SIZE), dtype=rows.dtype)
        lanes[:, :m] = seg
        lanes = lanes.reshape(n_rows, n_warps, WARP_SIZE)
        lanes = _kogge_stone(lanes)
        shifted = np.zeros((n_rows, n_warps), dtype=rows.dtype)
        shifted[:, 1:] = lanes[:, :-1, -1]
        offsets = _kogge_stone(shifted)
        lanes += offsets[..., None]
        lanes += carry[:, None, None]
        scanned = lanes.reshape(n_rows, -1)[:, :m]
        out[:, start:start + m] = scanned
        carry = scanned[:, -1].copy()
    return out


def prefix_scan_row(row, segment_len=1024):
    """Inclusive prefix sum of a 1-D sequence via the segmented warp scan.

    Integer input gives results bit-identical to a sequential running sum.

    >>> prefix_scan_row([1, 1, 1, 1]).tolist()
    [1, 2, 3, 4]
    """
    arr = np.asarray(row)
    if arr.ndim != 1:
        raise ValueError("prefix_scan_row expects a 1-D sequence")
    if segment_len < 1:
        raise ValueError(f"segment_len must be >= 1, got {segment_len}")
    if arr.size == 0:
        return arr.copy()
    return _scan_rows(arr[None, :], segment_len)[0]


def integral_image(img, segment_len=1024):
    """``B[y, x] = sum(I[:y+1, :x+1])``.

    Rows are scanned together with the warp scan; columns are then integrated
    sequentially top to bottom.
    """
    acc = _accumulator(as_gray_image(img))
    return _integral(acc, segment_len)


def _integral(acc, segment_len=1024):
    out = _scan_rows(acc, segment_len)
    for y in range(1, out.shape[0]):
        out[y] += out[y - 1]
    return out


def _stats(r, s, sq):
    if r < 1:
        raise ValueError(f"window radius must be >= 1, got {r}")
    area = (2 * r + 1) ** 2
    return WindowStats(r=r, sum=s, sum_sq=sq, mean=s / area)


def window_sums_direct(img, r):
    """Window statistics by summing all ``(2r+1)**2`` shifted copies."""
    if r < 1:
        raise ValueError(f"window radius must be >= 1, got {r}")
    acc = _accumulator(as_gray_image(img))
    h, w = acc.shape
    padded = np.pad(acc, r, mode="edge")
    squared = padded * padded
    s = np.zeros_like(acc)
    sq = np.zeros_like(acc)
    side = 2 * r + 1
    for dy in range(side):
        for dx in range(side):
            s += padded[dy:dy + h, dx:dx + w]
            sq += squared[dy:dy + h, dx:dx + w]
    return _stats(r, s, sq)


def window_sums_integral(img, r, segment_len=1024):
    """Window statistics from four corner lookups into an integral image of
    the clamp-padded image."""
    if r < 1:
        raise ValueError(f"window radius must be >= 1, got {r}")
    acc = _accumulator(as_gray_image(img))
    h, w = acc.shape
    padded = np.pad(acc, r, mode="edge")
    side = 2 * r + 1

    def box(values):
        b = np.zeros((values.shape[0] + 1, values.shape[1] + 1), dtype=values.dtype)
        b[1:, 1:] = _integral(values, segment_len)
        # b[y+1, x+1] is the integral up to (x, y); b[0, :] and b[:, 0] are B(-1, .)
        return (b[side:side + h, side:side + w] + b[:h, :w]
                - b[:h, side:side + w] - b[side:side + h, :w])

    return _stats(r, box(padded), box(padded * padded))


def window_sums(img, r, method="auto"):
    """Dispatch to the direct method for side <= 7 and the integral method
    otherwise, unless ``method`` names one explicitly."""
    if method == "auto":
        method = "direct" if 2 * r + 1 <= DIRECT_MAX_SIDE else "integral"
    if method == "direct":
        return window_sums_direct(img, r)
    if method == "integral":
        return window_sums_integral(img, r)
    raise ValueError(f"unknown summation method {method!r}")
