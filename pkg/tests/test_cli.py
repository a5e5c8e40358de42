import json

import numpy as np
import pytest

from zncc_stereo.cli import main
from zncc_stereo.image_io import read_disparity_pgm, synth_shift_pair, write_disparity_map, write_pgm


@pytest.fixture
def pair(tmp_path):
    ref, tgt = synth_shift_pair(64, 24, 4, seed=9)
    left, right = tmp_path / "l.pgm", tmp_path / "r.pgm"
    write_pgm(ref, str(left))
    write_pgm(tgt, str(right))
    return str(left), str(right)


def test_match_writes_disparity(pair, tmp_path):
    out = tmp_path / "d.pgm"
    assert main(["match", "--left", pair[0], "--right", pair[1], "--out", str(out), "--max-disp", "8"]) == 0
    disp = read_disparity_pgm(str(out))
    assert disp.shape == (24, 64)
    assert np.mean(disp[:, 6:] == 4) >= 0.9


def test_match_missing_file_is_io_error(pair, tmp_path):
    args = ["match", "--left", str(tmp_path / "nope.pgm"), "--right", pair[1], "--out", str(tmp_path / "o.pgm")]
    assert main(args) == 2


def test_match_bad_pgm_is_io_error(pair, tmp_path):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P2\n1 1\n255\n0\n")
    assert main(["match", "--left", str(bad), "--right", pair[1], "--out", str(tmp_path / "o.pgm")]) == 2


def test_match_size_mismatch_is_validation_error(pair, tmp_path):
    small = tmp_path / "s.pgm"
    write_pgm(np.zeros((5, 5)), str(small))
    assert main(["match", "--left", pair[0], "--right", str(small), "--out", str(tmp_path / "o.pgm")]) == 3


def test_bad_flag_values_exit_3(pair, tmp_path):
    base = ["match", "--left", pair[0], "--right", pair[1], "--out", str(tmp_path / "o.pgm")]
    assert main(base + ["--radius", "0"]) == 3
    assert main(base + ["--dt-mode", "int4"]) == 3
    assert main(base + ["--max-disp", "4", "--d-arb", "4"]) == 3


def test_no_dt_flag_equals_dt_mode_off(pair, tmp_path):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    common = ["match", "--left", pair[0], "--right", pair[1], "--max-disp", "8"]
    assert main(common + ["--out", str(a), "--no-dt"]) == 0
    assert main(common + ["--out", str(b), "--dt-mode", "off"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_dump_cost_does_not_change_output(pair, tmp_path):
    a, b, cv = tmp_path / "a.pgm", tmp_path / "b.pgm", tmp_path / "cv.bin"
    common = ["match", "--left", pair[0], "--right", pair[1], "--max-disp", "8"]
    assert main(common + ["--out", str(a)]) == 0
    assert main(common + ["--out", str(b), "--dump-cost", str(cv)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert cv.stat().st_size == 12 + 24 * 64 * 8 * 4


def test_config_file_and_flag_precedence(pair, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# tuning\nmax-disp = 8\ndt_mode=off\n")
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    assert main(["match", "--left", pair[0], "--right", pair[1], "--out", str(a), "--config", str(cfg)]) == 0
    assert main(["match", "--left", pair[0], "--right", pair[1], "--out", str(b), "--max-disp", "8", "--no-dt"]) == 0
    assert a.read_bytes() == b.read_bytes()
    cfg.write_text("max_disp = eight\n")
    assert main(["match", "--left", pair[0], "--right", pair[1], "--out", str(a), "--config", str(cfg)]) == 3


def test_eval_prints_json(tmp_path, capsys):
    gt = np.full((4, 6), 12.0)
    est = gt.copy()
    est[0, 0] = 30.0
    write_disparity_map(gt, str(tmp_path / "gt.pgm"))
    write_disparity_map(gt, str(tmp_path / "same.pgm"))
    write_disparity_map(est, str(tmp_path / "est.pgm"))
    assert main(["eval", "--est", str(tmp_path / "same.pgm"), "--gt", str(tmp_path / "gt.pgm")]) == 0
    assert '"d1_rate":0.0' in capsys.readouterr().out
    assert main(["eval", "--est", str(tmp_path / "est.pgm"), "--gt", str(tmp_path / "gt.pgm")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["erroneous"] == 1 and report["total_valid"] == 24


def test_eval_size_mismatch(tmp_path):
    write_disparity_map(np.ones((4, 6)), str(tmp_path / "a.pgm"))
    write_disparity_map(np.ones((4, 5)), str(tmp_path / "b.pgm"))
    assert main(["eval", "--est", str(tmp_path / "a.pgm"), "--gt", str(tmp_path / "b.pgm")]) == 3


def test_bench_writes_csv(pair, tmp_path):
    out = tmp_path / "bench.csv"
    args = ["bench", "--left", pair[0], "--right", pair[1], "--max-disp", "8", "--out", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "stage,repeats,median_ms,ratio_vs_reference"
    assert len(lines) == 9
    assert main(args + ["--repeats", "2"]) == 3


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    assert "selftest PASSED" in capsys.readouterr().out


def test_selftest_detects_injected_fault(capsys):
    assert main(["selftest", "--inject-codec-fault"]) == 4
    assert "selftest FAILED" in capsys.readouterr().out


def test_usage_errors_exit_3():
    assert main([]) == 3
    assert main(["match", "--left", "x.pgm"]) == 3


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "selftest" in capsys.readouterr().out
