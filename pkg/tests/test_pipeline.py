import numpy as np
import pytest

from zncc_stereo.aggregation import DtParams, dt_aggregate
from zncc_stereo.cost_volume import ScanConfig
from zncc_stereo.image_io import synth_shift_pair
from zncc_stereo.pipeline import (
    BENCH_FIELDS,
    PipelineConfig,
    benchmark,
    benchmark_csv,
    compute_cost_volume,
    evaluate_d1,
    run_pipeline,
    wta,
)


def _naive_wta(cv):
    h, w, D = cv.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            best = 0
            for d in range(1, D):
                if 1 - cv[y, x, d] < 1 - cv[y, x, best]:
                    best = d
            out[y, x] = best
    return out


def test_wta_examples():
    assert wta(np.array([[[0.1, 0.9, 0.5]]])).tolist() == [[1.0]]
    assert wta(np.array([[[0.7, 0.7, 0.2]]])).tolist() == [[0.0]]
    assert wta(np.zeros((2, 3, 4))).tolist() == [[0.0] * 3] * 2


def test_wta_matches_naive_oracle_with_ties(rng):
    cv = rng.integers(0, 4, (6, 7, 5)) / 4.0  # many ties
    assert np.array_equal(wta(cv), _naive_wta(cv))


def test_wta_ignores_per_pixel_offsets(rng):
    cv = rng.random((5, 6, 4))
    shifted = cv + rng.integers(-3, 4, (5, 6, 1)) * 0.25
    assert np.array_equal(wta(cv), wta(shifted))


def test_single_disparity_gives_zeros(rng):
    ref, tgt = synth_shift_pair(20, 8, 0)
    cfg = PipelineConfig(scan=ScanConfig(D=1))
    assert not run_pipeline(ref, tgt, cfg).any()


def test_d1_examples():
    gt = np.array([[10.0, 100.0, 10.0, -1.0]])
    est = np.array([[13.0, 104.0, 13.5, 7.0]])
    rep = evaluate_d1(est, gt)
    # 3.0 is not > 3; 4 is not > 5 % of 100; 3.5 > 3 and > 0.5
    assert (rep.total_valid, rep.erroneous) == (3, 1)
    assert rep.d1_rate == pytest.approx(1 / 3)


def test_d1_perfect_and_invalid_estimates():
    gt = np.array([[5.0, 6.0]])
    assert evaluate_d1(gt, gt).d1_rate == 0.0
    rep = evaluate_d1(np.array([[5.0, -1.0]]), gt)
    assert rep.breakdown["all/all"]["erroneous"] == 1
    assert rep.breakdown["all/est"] == {"erroneous": 0, "total": 1, "rate": 0.0}


def test_d1_noc_mask():
    gt = np.array([[5.0, 6.0, 7.0]])
    est = np.array([[5.0, 20.0, 7.0]])
    rep = evaluate_d1(est, gt, noc_mask=np.array([[1, 0, 1]]))
    assert rep.breakdown["noc/all"]["erroneous"] == 0
    assert rep.breakdown["noc/all"]["total"] == 2
    with pytest.raises(ValueError):
        evaluate_d1(est, gt[:, :2])


def test_recovers_synthetic_shift():
    ref, tgt = synth_shift_pair(256, 128, 7, seed=1)
    cfg = PipelineConfig(scan=ScanConfig(r=1, D=32))
    disp = run_pipeline(ref, tgt, cfg)
    assert np.mean(disp[:, 8:] == 7) >= 0.95


def test_no_dt_is_plain_wta(rng):
    ref, tgt = synth_shift_pair(64, 16, 3, seed=2)
    cfg = PipelineConfig(scan=ScanConfig(D=8), aggregation_enabled=False)
    assert np.array_equal(run_pipeline(ref, tgt, cfg), wta(compute_cost_volume(ref, tgt, cfg)))


def test_dt_path_composes(rng):
    ref, tgt = synth_shift_pair(64, 16, 3, seed=2)
    cfg = PipelineConfig(scan=ScanConfig(D=8))
    cost = dt_aggregate(compute_cost_volume(ref, tgt, cfg), ref, cfg.dt)
    assert np.array_equal(run_pipeline(ref, tgt, cfg), np.argmin(cost, -1))


def test_summation_method_does_not_change_output():
    ref, tgt = synth_shift_pair(48, 12, 2, seed=3)
    outs = [
        compute_cost_volume(ref, tgt, PipelineConfig(scan=ScanConfig(r=2, D=6), summation_method=m))
        for m in ("direct", "integral", "auto")
    ]
    assert outs[0].tobytes() == outs[1].tobytes() == outs[2].tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(summation_method="fft")
    with pytest.raises(ValueError):
        PipelineConfig(scan=ScanConfig(D=4), dt=DtParams(d_arb=4))
    with pytest.raises(ValueError):
        run_pipeline(np.zeros((3, 3)), np.zeros((3, 4)), PipelineConfig())


def test_benchmark_rows_and_csv():
    ref, tgt = synth_shift_pair(64, 16, 2)
    rows = benchmark(ref, tgt, PipelineConfig(scan=ScanConfig(D=8)), repeats=3)
    stages = [row.stage for row in rows]
    assert stages == ["zncc_reference", "zncc_fast", "dt_l2r", "dt_r2l", "dt_u2d", "dt_d2u", "codec", "wta"]
    assert rows[0].ratio_vs_reference == pytest.approx(1.0)
    assert all(row.repeats == 3 and row.median_ms > 0 for row in rows)
    lines = benchmark_csv(rows).splitlines()
    assert lines[0] == ",".join(BENCH_FIELDS)
    assert len(lines) == 9
    with pytest.raises(ValueError):
        benchmark(ref, tgt, PipelineConfig(scan=ScanConfig(D=8)), repeats=2)
