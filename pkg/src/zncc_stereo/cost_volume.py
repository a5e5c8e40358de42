"""ZNCC cost volumes.

``zncc_reference`` evaluates the correlation directly from mean-subtracted
window samples. ``zncc_fast`` uses precomputed window statistics and obtains
the per-disparity product sums with a zigzag incremental scan: the image is
cut into bands of ``vz`` rows and tiles of ``hz`` columns; inside a tile each
band walks down its rows and then steps one column right, updating the window
product sums from the entering and leaving rows/columns while holding only
``vz + 1`` accumulators per lane.

Cost volumes are float arrays of shape ``(height, width, D)``. Values are
correlations clamped to ``[0, 1]``; disparities with ``x - d < 0`` and
windows with vanishing spread score 0.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .image_io import as_gray_image
from .summation import WindowStats

# Work partition for zncc_fast; fixed so results never depend on thread count.
_D_CHUNK = 16
_TILES_PER_ITEM = 8


@dataclass(frozen=True)
class ScanConfig:
    r: int = 1
    D: int = 128
    vz: int = 4
    hz: int = 32
    sigma_floor: float = 1e-6

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"window radius must be >= 1, got {self.r}")
        if self.D < 1:
            raise ValueError(f"max disparity must be >= 1, got {self.D}")
        if self.vz < 2:
            raise ValueError(f"vz must be >= 2, got {self.vz}")
        if self.hz < 1:
            raise ValueError(f"hz must be >= 1, got {self.hz}")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")

    @property
    def side(self):
        return 2 * self.r + 1


class ProductRowSums:
    """Accumulators of one zigzag lane (or a vectorised group of lanes).

    ``regs[k]`` ends each column holding the window product sum of band row
    ``k``; ``rs`` is the running sum / difference register. Nothing else is
    kept, so a lane never holds more than ``vz + 1`` accumulators.
    """

    __slots__ = ("regs", "rs")

    def __init__(self, vz, like):
        self.regs = [np.zeros_like(like) for _ in range(vz)]
        self.rs = np.zeros_like(like)

    @property
    def n_accumulators(self):
        return len(self.regs) + 1


def _check_pair(ref, tgt):
    ref = as_gray_image(ref)
    tgt = as_gray_image(tgt)
    if ref.shape != tgt.shape:
        raise ValueError(f"image shapes differ: {ref.shape} vs {tgt.shape}")
    return ref, tgt


def zncc_reference(ref, tgt, cfg):
    """Direct ZNCC: mean-subtract each window sample and correlate.

    Loops over window offsets and disparities; every pixel's window uses
    clamped (replicated) border samples.
    """
    ref, tgt = _check_pair(ref, tgt)
    h, w = ref.shape
    r, side = cfg.r, cfg.side
    pr = np.pad(ref, r, mode="edge")
    pt = np.pad(tgt, r, mode="edge")

    def window_mean(p):
        acc = np.zeros((h, w))
        for dy in range(side):
            for dx in range(side):
                acc += p[dy:dy + h, dx:dx + w]
        return acc / (side * side)

    mean_r = window_mean(pr)
    mean_t = window_mean(pt)
    num = np.zeros((cfg.D, h, w))
    var_r = np.zeros((h, w))
    var_t = np.zeros((h, w))
    for dy in range(side):
        for dx in range(side):
            dr = pr[dy:dy + h, dx:dx + w] - mean_r
            dt = pt[dy:dy + h, dx:dx + w] - mean_t
            var_r += dr * dr
            var_t += dt * dt
            for d in range(min(cfg.D, w)):
                # reference centre x pairs with target centre x - d
                num[d, :, d:] += dr[:, d:] * dt[:, :w - d]
    sig_r = np.sqrt(var_r)
    sig_t = np.sqrt(var_t)
    cost = np.zeros((h, w, cfg.D))
    for d in range(min(cfg.D, w)):
        sr = sig_r[:, d:]
        st = sig_t[:, :w - d]
        ok = (sr >= cfg.sigma_floor) & (st >= cfg.sigma_floor)
        c = np.zeros_like(sr)
        c[ok] = num[d, :, d:][ok] / (sr[ok] * st[ok])
        cost[:, d:, d] = c
    return np.clip(cost, 0.0, 1.0)


def _lane_view(P, nb, nt, vz, hz):
    """Accessor returning, for every lane, the product at offset (oy, ox)
    from the lane's top-left padded corner."""

    def plane(oy, ox):
        return P[:, oy:oy + nb * vz:vz, ox:ox + nt * hz:hz]

    return plane


def _row_sum(plane, oy, ox, side):
    acc = plane(oy, ox).copy()
    for a in range(1, side):
        acc += plane(oy, ox + a)
    return acc


def _first_window(plane, r, vz):
    """Step 1: full window sum of the band's top pixel, summed row by row,
    with the sum of the window's top row retained in ``regs[0]``."""
    side = 2 * r + 1
    state = ProductRowSums(vz, plane(0, 0))
    state.regs[0] = _row_sum(plane, 0, 0, side)
    state.rs = state.regs[0].copy()
    for a in range(1, side):
        state.rs += _row_sum(plane, a, 0, side)
    return state


def _walk_down(plane, state, r, vz, emit):
    """Steps 2-5: descend the band's first column, ending with ``regs[k]``
    holding the window sum of band row ``k``."""
    side = 2 * r + 1
    emit(0, 0, state.rs)
    for k in range(vz - 1):
        if k > 0:
            state.regs[k] = _row_sum(plane, k, 0, side)
        # step 2: rs becomes the window sum minus its top row
        state.rs -= state.regs[k]
        # step 3: add that difference back to recover this row's window sum
        state.regs[k] += state.rs
        # step 4: append the row entering below
        state.rs += _row_sum(plane, k + side, 0, side)
        emit(0, k + 1, state.rs)
    # step 5
    state.regs[vz - 1] = state.rs.copy()


def _advance_column(plane, state, r, vz, j, emit):
    """Move every lane from tile column ``j - 1`` to ``j``."""
    side = 2 * r + 1
    lead, trail = j - 1 + side, j - 1
    # steps 6-7: column difference for the first band row
    state.rs = plane(0, lead) - plane(0, trail)
    for a in range(1, side):
        state.rs += plane(a, lead) - plane(a, trail)
    # step 8
    state.regs[0] += state.rs
    emit(j, 0, state.regs[0])
    for k in range(1, vz):
        # step 9: slide the column difference down one row via the corners
        state.rs += plane(k - 1 + side, lead) - plane(k - 1 + side, trail)
        state.rs -= plane(k - 1, lead) - plane(k - 1, trail)
        # step 10
        state.regs[k] += state.rs
        emit(j, k, state.regs[k])


def _zigzag_sums(P, r, vz, hz, nb, nt, trace=None):
    """Window product sums for every lane of the padded product volume ``P``.

    ``P`` has shape ``(dd, nb*vz + 2r, nt*hz + 2r)``; the result has shape
    ``(dd, nb*vz, nt*hz)``.
    """
    out = np.empty((P.shape[0], nb * vz, nt * hz), dtype=P.dtype)
    plane = _lane_view(P, nb, nt, vz, hz)

    def emit(j, k, value):
        out[:, k:nb * vz:vz, j:nt * hz:hz] = value

    state = _first_window(plane, r, vz)
    _walk_down(plane, state, r, vz, emit)
    if trace is not None:
        trace(state)
    for j in range(1, hz):
        _advance_column(plane, state, r, vz, j, emit)
        if trace is not None:
            trace(state)
    return out


def product_sum_initial(ref, tgt, x, band_top, d, r, vz):
    """Opening accumulator state of a single zigzag lane.

    The lane starts at ``(x, band_top)`` for disparity ``d``. ``rs`` holds the
    full window product sum there and ``regs[0]`` the product sum of the
    window's top row ``band_top - r``; the other registers are still empty.
    """
    ref, tgt = _check_pair(ref, tgt)
    h, w = ref.shape
    if not (0 <= x < w and 0 <= band_top < h):
        raise ValueError("lane origin outside the image")
    if d > x:
        raise ValueError(f"disparity {d} infeasible at column {x}")
    rows = np.clip(np.arange(band_top - r, band_top + vz + r), 0, h - 1)
    cols = np.arange(x - r, x + r + 1)
    patch = ref[np.ix_(rows, np.clip(cols, 0, w - 1))] * tgt[np.ix_(rows, np.clip(cols - d, 0, w - 1))]
    P = patch[None, :, :]
    plane = _lane_view(P, 1, 1, vz, 1)
    return _first_window(plane, r, vz)


def _product_volume(ref, tgt, d_lo, d_hi, row_idx, x_lo, n_cols, r, dtype):
    """Products ``I_R(u) * I_T(u - d)`` over padded coordinates for a tile group."""
    w = ref.shape[1]
    u = np.arange(x_lo - r, x_lo - r + n_cols)
    rrows = ref[row_idx][:, np.clip(u, 0, w - 1)].astype(dtype)
    trows = tgt[row_idx]
    P = np.empty((d_hi - d_lo, len(row_idx), n_cols), dtype=dtype)
    for i, d in enumerate(range(d_lo, d_hi)):
        P[i] = rrows * trows[:, np.clip(u - d, 0, w - 1)].astype(dtype)
    return P


def _finish(S, out, d_lo, x_lo, stats_ref, stats_tgt, cfg, dtype):
    """Turn product sums into clamped correlations and store them in ``out``."""
    h, w = out.shape[:2]
    x_hi = min(x_lo + S.shape[2], w)
    area = dtype(cfg.side * cfg.side)
    sum_r = stats_ref.sum.astype(dtype)
    sum_t = stats_tgt.sum.astype(dtype)
    # l^2 * (sum of squares - l^2 * mean^2): exact for 8-bit input
    var_r = np.maximum(area * stats_ref.sum_sq.astype(dtype) - sum_r * sum_r, 0)
    var_t = np.maximum(area * stats_tgt.sum_sq.astype(dtype) - sum_t * sum_t, 0)
    # sigma = sqrt(var) / l, so sigma < floor  <=>  var < l^2 floor^2
    floor_sq = area * dtype(cfg.sigma_floor) ** 2
    for i in range(S.shape[0]):
        d = d_lo + i
        xa = max(x_lo, d)
        if xa >= x_hi:
            out[:, x_lo:x_hi, d] = 0
            continue
        out[:, x_lo:xa, d] = 0
        s = S[i, :h, xa - x_lo:x_hi - x_lo]
        vr = var_r[:, xa:x_hi]
        vt = var_t[:, xa - d:x_hi - d]
        num = area * s - sum_r[:, xa:x_hi] * sum_t[:, xa - d:x_hi - d]
        ok = (vr >= floor_sq) & (vt >= floor_sq)
        c = np.zeros_like(s)
        c[ok] = num[ok] / np.sqrt(vr[ok] * vt[ok])
        out[:, xa:x_hi, d] = np.clip(c, 0, 1)


def zncc_fast(ref, tgt, cfg, stats_ref, stats_tgt, threads=1, precision="float64"):
    """ZNCC from window statistics plus zigzag incremental product sums.

    ``precision="float32"`` runs the product sums and the final division in
    single precision.
    """
    ref, tgt = _check_pair(ref, tgt)
    for st in (stats_ref, stats_tgt):
        if not isinstance(st, WindowStats) or st.r != cfg.r:
            raise ValueError("window statistics must be computed at the scan radius")
        if st.sum.shape != ref.shape:
            raise ValueError("window statistics do not match the image size")
    dtype = {"float64": np.float64, "float32": np.float32}[precision]
    h, w = ref.shape
    r = cfg.r
    vz = min(cfg.vz, h)
    hz = cfg.hz
    nb = -(-h // vz)
    nt = -(-w // hz)
    row_idx = np.clip(np.arange(-r, nb * vz + r), 0, h - 1)
    out = np.empty((h, w, cfg.D), dtype=dtype)

    items = []
    for d_lo in range(0, cfg.D, _D_CHUNK):
        d_hi = min(d_lo + _D_CHUNK, cfg.D)
        for t_lo in range(0, nt, _TILES_PER_ITEM):
            items.append((d_lo, d_hi, t_lo, min(t_lo + _TILES_PER_ITEM, nt)))

    def run(item):
        d_lo, d_hi, t_lo, t_hi = item
        x_lo = t_lo * hz
        n_tiles = t_hi - t_lo
        P = _product_volume(ref, tgt, d_lo, d_hi, row_idx, x_lo, n_tiles * hz + 2 * r, r, dtype)
        S = _zigzag_sums(P, r, vz, hz, nb, n_tiles)
        _finish(S, out, d_lo, x_lo, stats_ref, stats_tgt, cfg, dtype)

    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, items))
    else:
        for item in items:
            run(item)
    return out


_CV_HEADER = struct.Struct("<3i")


def write_cost_volume(cv, path):
    """Dump a cost volume: ``<i4`` width, height, D then ``<f4`` values,
    disparity innermost."""
    cv = np.asarray(cv)
    h, w, D = cv.shape
    with open(path, "wb") as fh:
        fh.write(_CV_HEADER.pack(w, h, D))
        fh.write(np.ascontiguousarray(cv, dtype="<f4").tobytes())


def read_cost_volume(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _CV_HEADER.size:
        raise ValueError(f"{path}: truncated cost-volume header")
    w, h, D = _CV_HEADER.unpack_from(buf)
    n = w * h * D
    if len(buf) - _CV_HEADER.size != 4 * n:
        raise ValueError(f"{path}: expected {4 * n} payload bytes")
    data = np.frombuffer(buf, dtype="<f4", offset=_CV_HEADER.size, count=n)
    return data.reshape(h, w, D).astype(np.float32)
