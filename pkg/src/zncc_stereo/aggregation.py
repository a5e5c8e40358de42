"""Domain-transform cost aggregation.

Four recursive passes (left-to-right, right-to-left, top-to-bottom,
bottom-to-top) each add the neighbour's aggregated cost scaled by an
edge-aware weight ``K * exp(-|dI| / sigma_r)`` with ``K = exp(-1 / sigma_s)``.

``dt_aggregate`` operates on matching costs (lower is better). Narrow-integer
modes scale costs by ``T`` after the first pass and keep them small by
subtracting, per pixel, the value at a fixed disparity ``d_arb`` during one
pass. In ``int8`` mode the costs leave the right-to-left pass as packed 8-bit
codes and are decoded before the top-to-bottom pass.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .image_io import as_gray_image
from .quantization import SaturationCounter, decode_volume, encode_volume, quantize_scale_array, saturate

MODES = ("float", "int32", "int16", "int8")

# Scanline chunk per worker; fixed so results never depend on thread count.
_LINES_PER_ITEM = 32

INT_DTYPE = {"int32": np.int32, "int16": np.int16, "int8": np.int16}

# Pass that applies the d_arb subtraction in each mode.
NORMALIZE_PASS = {"float": "u2d", "int32": "u2d", "int16": "u2d", "int8": "r2l"}


@dataclass(frozen=True)
class DtParams:
    sigma_s: float = 5.0
    sigma_r: float = 52.0
    d_arb: int = 0
    T: int = 21
    mode: str = "float"
    normalize: bool = True

    def __post_init__(self):
        if not (self.sigma_s > 0 and self.sigma_r > 0):
            raise ValueError("sigma_s and sigma_r must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown DT mode {self.mode!r}; expected one of {MODES}")
        if self.T <= 0:
            raise ValueError(f"scale coefficient T must be positive, got {self.T}")
        if self.d_arb < 0:
            raise ValueError(f"d_arb must be non-negative, got {self.d_arb}")

    @property
    def K(self):
        return math.exp(-1.0 / self.sigma_s)


@dataclass(frozen=True)
class WeightMaps:
    left: np.ndarray
    right: np.ndarray
    up: np.ndarray
    down: np.ndarray


def compute_weights(guide, p):
    """Directional weights ``K * exp(-|I(x,y) - I(neighbour)| / sigma_r)``.

    A missing neighbour at the border counts as equal intensity (weight K).
    """
    img = as_gray_image(guide)
    K = p.K

    def weight(diff):
        return K * np.exp(-np.abs(diff) / p.sigma_r)

    dx = np.zeros_like(img)
    dx[:, 1:] = img[:, 1:] - img[:, :-1]  # I(x,y) - I(x-1,y)
    dy = np.zeros_like(img)
    dy[1:, :] = img[1:, :] - img[:-1, :]  # I(x,y) - I(x,y-1)
    left = weight(dx)
    up = weight(dy)
    right = np.full_like(img, K)
    right[:, :-1] = left[:, 1:]
    down = np.full_like(img, K)
    down[:-1, :] = up[1:, :]
    return WeightMaps(left=left, right=right, up=up, down=down)


def _check(cv, w):
    cv = np.asarray(cv)
    if cv.ndim != 3:
        raise ValueError(f"cost volume must be 3-D, got shape {cv.shape}")
    if w.shape != cv.shape[:2]:
        raise ValueError(f"weights {w.shape} do not match cost volume {cv.shape[:2]}")
    return cv


def _recurse(cv, w, axis, reverse, d_arb, counter, threads):
    """Shared recurrence ``out[i] = cv[i] + out[i-1] * w[i]`` along ``axis``.

    Integer volumes round the weighted carry, optionally subtract the d_arb
    channel in wide arithmetic, then saturate to their dtype.
    """
    cv = np.asarray(cv)
    integer = np.issubdtype(cv.dtype, np.integer)
    out = np.empty_like(cv) if integer else np.empty(cv.shape, dtype=np.float64)
    n_steps = cv.shape[axis]
    n_lines = cv.shape[1 - axis]
    order = range(n_steps - 1, -1, -1) if reverse else range(n_steps)

    def take(a, i, lo, hi):
        return a[lo:hi, i] if axis == 1 else a[i, lo:hi]

    def put(i, lo, hi, value):
        if axis == 1:
            out[lo:hi, i] = value
        else:
            out[i, lo:hi] = value

    def run(span):
        lo, hi = span
        sat = SaturationCounter()
        prev = None
        for i in order:
            base = take(cv, i, lo, hi)
            if prev is None:
                val = base.astype(np.int64) if integer else base.astype(np.float64)
            else:
                carry = prev * take(w, i, lo, hi)[:, None]
                val = base + (np.rint(carry).astype(np.int64) if integer else carry)
            if d_arb is not None:
                val = val - val[:, d_arb:d_arb + 1]
            if integer:
                val = saturate(val, cv.dtype, sat)
            put(i, lo, hi, val)
            prev = val
        return sat.count

    spans = [(lo, min(lo + _LINES_PER_ITEM, n_lines)) for lo in range(0, n_lines, _LINES_PER_ITEM)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(run, spans))
    else:
        counts = [run(s) for s in spans]
    if counter is not None:
        counter.add(sum(counts))
    return out


def dt_pass_l2r(cv, w, d_arb=None, counter=None, threads=1):
    """``C_L(x) = C(x) + C_L(x-1) * W_L(x)``, starting from ``C_L(0) = C(0)``."""
    cv = _check(cv, w.left)
    return _recurse(cv, w.left, axis=1, reverse=False, d_arb=d_arb, counter=counter, threads=threads)


def dt_pass_r2l(cv, w, d_arb=None, counter=None, threads=1):
    """``C_R(x) = C_L(x) + C_R(x+1) * W_R(x)``; the last column is copied."""
    cv = _check(cv, w.right)
    return _recurse(cv, w.right, axis=1, reverse=True, d_arb=d_arb, counter=counter, threads=threads)


def dt_pass_u2d(cv, w, d_arb=None, counter=None, threads=1):
    """``C_U(y) = C_R(y) + C_U(y-1) * W_U(y)``; the top row is copied."""
    cv = _check(cv, w.up)
    return _recurse(cv, w.up, axis=0, reverse=False, d_arb=d_arb, counter=counter, threads=threads)


def dt_pass_d2u(cv, w, d_arb=None, counter=None, threads=1):
    """``C_D(y) = C_U(y) + C_D(y+1) * W_D(y)``; the bottom row is copied."""
    cv = _check(cv, w.down)
    return _recurse(cv, w.down, axis=0, reverse=True, d_arb=d_arb, counter=counter, threads=threads)


PASSES = {"l2r": dt_pass_l2r, "r2l": dt_pass_r2l, "u2d": dt_pass_u2d, "d2u": dt_pass_d2u}


def normalize_zero_mean(cv, w, p, at_pass, counter=None, threads=1):
    """Run pass ``at_pass`` with nearly-zero-mean normalisation.

    Each freshly aggregated value has the same pixel's ``d_arb`` value
    subtracted, so the ``d_arb`` channel of the result is identically 0.
    """
    cv = np.asarray(cv)
    if not 0 <= p.d_arb < cv.shape[2]:
        raise ValueError(f"d_arb={p.d_arb} outside [0, {cv.shape[2]})")
    return PASSES[at_pass](cv, w, d_arb=p.d_arb, counter=counter, threads=threads)


def dt_aggregate(cv, guide, p, counter=None, threads=1):
    """Aggregate a ZNCC volume in all four directions.

    ``cv`` holds correlations (higher = better); aggregation runs on the
    matching cost ``1 - cv`` so that the result is a cost volume whose
    per-pixel minimum is the chosen disparity. Integer modes return integer
    volumes in units of ``1 / T``.
    """
    cv = np.asarray(cv, dtype=np.float64)
    if cv.ndim != 3:
        raise ValueError(f"cost volume must be 3-D, got shape {cv.shape}")
    if not 0 <= p.d_arb < cv.shape[2]:
        raise ValueError(f"d_arb={p.d_arb} outside [0, {cv.shape[2]})")
    w = compute_weights(guide, p)
    if w.left.shape != cv.shape[:2]:
        raise ValueError("guide image does not match the cost volume")
    norm_at = NORMALIZE_PASS[p.mode] if p.normalize else None

    def step(name, vol):
        if name == norm_at:
            return normalize_zero_mean(vol, w, p, name, counter=counter, threads=threads)
        return PASSES[name](vol, w, counter=counter, threads=threads)

    cost = step("l2r", 1.0 - cv)
    if p.mode != "float":
        cost = quantize_scale_array(cost, p.T, dtype=INT_DTYPE[p.mode], counter=counter)
    cost = step("r2l", cost)
    if p.mode == "int8":
        cost = decode_volume(encode_volume(cost))
    cost = step("u2d", cost)
    return step("d2u", cost)
