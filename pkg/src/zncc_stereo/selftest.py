"""Built-in consistency checks run by ``zncc-stereo selftest``."""

from __future__ import annotations

import numpy as np

from . import quantization as q
from .aggregation import WeightMaps, dt_pass_l2r
from .cost_volume import ScanConfig, zncc_fast, zncc_reference
from .summation import prefix_scan_row, window_sums_direct, window_sums_integral

# Largest |decode(encode(v)) - v| per flag class over all 16-bit inputs.
CODEC_BOUNDS = {0b01: 511, 0b10: 31, 0b11: 1}


def _faulty_encode(values):
    codes = q.encode16_array(values)
    # swap the two upper flag classes
    flag = codes & 0b11
    return np.where(flag == 0b10, codes | 0b01, codes).astype(np.uint8)


def check_codec(encode=q.encode16_array):
    """Exhaustive sweep over all 65536 inputs; returns (passed, total)."""
    v = np.arange(q.INT16_MIN, q.INT16_MAX + 1, dtype=np.int64)
    codes = encode(v)
    back = q.decode8_array(codes).astype(np.int64)
    flag = codes & 0b11
    checks = [
        bool(np.all((back == 0) == (v >= 0))),
        bool(np.all(back <= 0)),
        bool(np.all(flag[v < 0] != 0)),
        bool(np.all(codes[v >= 0] == 0)),
    ]
    for f, bound in CODEC_BOUNDS.items():
        sel = flag == f
        checks.append(bool(sel.any()) and int(np.abs(back[sel] - v[sel]).max()) == bound)
    rng = np.random.default_rng(1)
    words = rng.integers(0, 2**32, size=10_000, dtype=np.uint64).astype(np.uint32)
    checks.append(bool(np.array_equal(q.pack_words(q.unpack_words(words[:, None])), words[:, None])))
    return sum(checks), len(checks)


def check_summation():
    rng = np.random.default_rng(2)
    checks = []
    for r in range(1, 8):
        img = rng.integers(0, 256, size=(24, 40)).astype(np.float64)
        a, b = window_sums_direct(img, r), window_sums_integral(img, r)
        checks.append(np.array_equal(a.sum, b.sum) and np.array_equal(a.sum_sq, b.sum_sq))
    row = rng.integers(0, 1000, size=1000)
    for seg in (1, 32, 96, 1000):
        checks.append(np.array_equal(prefix_scan_row(row, seg), np.cumsum(row)))
    return sum(checks), len(checks)


def check_zncc():
    rng = np.random.default_rng(3)
    checks = []
    for r, vz, hz in [(1, 2, 8), (2, 4, 32), (3, 6, 5)]:
        a = rng.integers(0, 256, size=(20, 36)).astype(np.float64)
        b = rng.integers(0, 256, size=(20, 36)).astype(np.float64)
        cfg = ScanConfig(r=r, D=8, vz=vz, hz=hz)
        fast = zncc_fast(a, b, cfg, window_sums_direct(a, r), window_sums_direct(b, r))
        checks.append(float(np.abs(fast - zncc_reference(a, b, cfg)).max()) <= 1e-5)
    return sum(checks), len(checks)


def check_dt():
    checks = []
    x = np.arange(64)
    for w in (0.5, 0.818731):
        ones = np.full((1, 64), w)
        maps = WeightMaps(ones, ones, ones, ones)
        out = dt_pass_l2r(np.ones((1, 64, 1)), maps)[0, :, 0]
        checks.append(float(np.abs(out - (1 - w ** (x + 1)) / (1 - w)).max()) <= 1e-9)
    return sum(checks), len(checks)


def run_all(inject_codec_fault=False):
    encode = _faulty_encode if inject_codec_fault else q.encode16_array
    return [
        ("codec", *check_codec(encode)),
        ("summation", *check_summation()),
        ("zncc", *check_zncc()),
        ("dt", *check_dt()),
    ]
