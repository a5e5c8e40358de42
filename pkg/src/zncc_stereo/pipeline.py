"""Winner-take-all selection, end-to-end matching, D1 evaluation and stage
timing."""

from __future__ import annotations

import csv
import io
import logging
import os
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .aggregation import INT_DTYPE, NORMALIZE_PASS, PASSES, DtParams, compute_weights, dt_aggregate, normalize_zero_mean
from .cost_volume import ScanConfig, _check_pair, zncc_fast, zncc_reference
from .quantization import SaturationCounter, decode_volume, encode_volume, quantize_scale_array
from .summation import window_sums

logger = logging.getLogger(__name__)

SUMMATION_METHODS = ("direct", "integral", "auto")


@dataclass(frozen=True)
class PipelineConfig:
    scan: ScanConfig = field(default_factory=ScanConfig)
    dt: DtParams = field(default_factory=DtParams)
    summation_method: str = "auto"
    aggregation_enabled: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.summation_method not in SUMMATION_METHODS:
            raise ValueError(f"unknown summation method {self.summation_method!r}")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")
        if self.aggregation_enabled and self.dt.d_arb >= self.scan.D:
            raise ValueError(f"d_arb={self.dt.d_arb} must be below D={self.scan.D}")

    @property
    def workers(self):
        return self.threads or os.cpu_count() or 1


def wta(cv):
    """``argmin_d (1 - C)`` per pixel, ties going to the smallest ``d``."""
    cv = np.asarray(cv)
    return np.argmin(1.0 - cv, axis=-1).astype(np.float64)


def wta_cost(cost):
    """Per-pixel argmin of an aggregated cost volume, smallest ``d`` on ties."""
    return np.argmin(np.asarray(cost), axis=-1).astype(np.float64)


def compute_cost_volume(ref, tgt, cfg):
    """Window statistics followed by the zigzag ZNCC volume."""
    ref, tgt = _check_pair(ref, tgt)
    r = cfg.scan.r
    stats_ref = window_sums(ref, r, cfg.summation_method)
    stats_tgt = window_sums(tgt, r, cfg.summation_method)
    return zncc_fast(ref, tgt, cfg.scan, stats_ref, stats_tgt, threads=cfg.workers)


def run_pipeline(ref, tgt, cfg):
    """Match a rectified pair; returns the disparity map of ``ref``.

    Aggregation is guided by the reference image.
    """
    ref, tgt = _check_pair(ref, tgt)
    cv = compute_cost_volume(ref, tgt, cfg)
    if not cfg.aggregation_enabled:
        return wta(cv)
    counter = SaturationCounter()
    cost = dt_aggregate(cv, ref, cfg.dt, counter=counter, threads=cfg.workers)
    if counter.count:
        logger.warning("DT %s mode saturated %d values", cfg.dt.mode, counter.count)
    return wta_cost(cost)


@dataclass
class EvalReport:
    total_valid: int
    erroneous: int
    d1_rate: float
    breakdown: dict

    def as_dict(self):
        return {
            "total_valid": self.total_valid,
            "erroneous": self.erroneous,
            "d1_rate": self.d1_rate,
            "breakdown": self.breakdown,
        }


def _region(bad, region):
    n = int(np.count_nonzero(region))
    e = int(np.count_nonzero(bad & region))
    return {"erroneous": e, "total": n, "rate": e / n if n else 0.0}


def evaluate_d1(est, gt, noc_mask=None):
    """KITTI-style D1: a pixel with valid ground truth is wrong when its error
    exceeds both 3 px and 5 % of the true disparity.

    Invalid estimates count as wrong in the ``all`` rows and are left out of
    the ``est`` rows. ``noc_mask`` (non-zero = non-occluded) adds ``noc``
    rows.
    """
    est = np.asarray(est, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if est.shape != gt.shape:
        raise ValueError(f"disparity maps differ in shape: {est.shape} vs {gt.shape}")
    gt_valid = np.isfinite(gt) & (gt >= 0)
    est_valid = np.isfinite(est) & (est >= 0)
    err = np.abs(est - gt)
    bad = ~est_valid | ((err > 3.0) & (err > 0.05 * gt))
    bad &= gt_valid
    breakdown = {
        "all/all": _region(bad, gt_valid),
        "all/est": _region(bad, gt_valid & est_valid),
    }
    if noc_mask is not None:
        noc = np.asarray(noc_mask) != 0
        if noc.shape != gt.shape:
            raise ValueError("occlusion mask does not match the disparity maps")
        breakdown["noc/all"] = _region(bad, gt_valid & noc)
        breakdown["noc/est"] = _region(bad, gt_valid & noc & est_valid)
    total = breakdown["all/all"]
    return EvalReport(
        total_valid=total["total"],
        erroneous=total["erroneous"],
        d1_rate=total["rate"],
        breakdown=breakdown,
    )


@dataclass
class BenchRow:
    stage: str
    repeats: int
    median_ms: float
    ratio_vs_reference: float


def _time(fn, repeats):
    samples = []
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(samples), result


def benchmark(ref, tgt, cfg, repeats=3):
    """Median wall time of every stage; ratios are reference time / stage time."""
    if repeats < 3:
        raise ValueError("benchmark needs at least 3 repeats")
    ref, tgt = _check_pair(ref, tgt)
    workers = cfg.workers
    rows = []
    ref_ms, _ = _time(lambda: zncc_reference(ref, tgt, cfg.scan), repeats)
    rows.append(("zncc_reference", ref_ms))
    fast_ms, cv = _time(lambda: compute_cost_volume(ref, tgt, cfg), repeats)
    rows.append(("zncc_fast", fast_ms))

    dt = cfg.dt
    weights = compute_weights(ref, dt)
    norm_at = NORMALIZE_PASS[dt.mode] if dt.normalize else None
    counter = SaturationCounter()
    vol = 1.0 - cv
    for name in ("l2r", "r2l", "u2d", "d2u"):
        if name == "r2l" and dt.mode != "float":
            vol = quantize_scale_array(vol, dt.T, dtype=INT_DTYPE[dt.mode])
        if name == "u2d" and dt.mode == "int8":
            vol = decode_volume(encode_volume(vol))

        def run_pass(name=name, src=vol):
            if name == norm_at:
                return normalize_zero_mean(src, weights, dt, name, counter=counter, threads=workers)
            return PASSES[name](src, weights, counter=counter, threads=workers)

        ms, vol = _time(run_pass, repeats)
        rows.append((f"dt_{name}", ms))
    d_arb = min(dt.d_arb, cv.shape[2] - 1)
    codec_src = quantize_scale_array(cv[..., d_arb:d_arb + 1] - cv, dt.T)
    ms, _ = _time(lambda: decode_volume(encode_volume(codec_src)), repeats)
    rows.append(("codec", ms))
    ms, _ = _time(lambda: wta(cv), repeats)
    rows.append(("wta", ms))
    return [
        BenchRow(stage, repeats, ms, ref_ms / ms if ms > 0 else float("inf"))
        for stage, ms in rows
    ]


BENCH_FIELDS = ("stage", "repeats", "median_ms", "ratio_vs_reference")


def benchmark_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_FIELDS)
    for row in rows:
        writer.writerow([row.stage, row.repeats, f"{row.median_ms:.3f}", f"{row.ratio_vs_reference:.4f}"])
    return buf.getvalue()
