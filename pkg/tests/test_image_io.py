import numpy as np
import pytest

from conftest import random_image
from zncc_stereo.image_io import (
    INVALID_DISPARITY,
    PgmFormatError,
    read_disparity_pgm,
    read_matrix_txt,
    read_pgm,
    synth_shift_pair,
    write_disparity_map,
    write_matrix_txt,
    write_pgm,
)


def _raw(tmp_path, data, name="img.pgm"):
    path = tmp_path / name
    path.write_bytes(data)
    return str(path)


def test_read_minimal_file(tmp_path):
    img = read_pgm(_raw(tmp_path, b"P5\n2 1\n255\n" + bytes([10, 20])))
    assert img.shape == (1, 2)
    assert img.tolist() == [[10.0, 20.0]]


def test_read_single_zero_pixel(tmp_path):
    img = read_pgm(_raw(tmp_path, b"P5\n1 1\n255\n\x00"))
    assert img.tolist() == [[0.0]]


def test_header_comments_are_skipped(tmp_path):
    img = read_pgm(_raw(tmp_path, b"P5\n# made by hand\n2 1 # size\n255\n\x01\x02"))
    assert img.tolist() == [[1.0, 2.0]]


def test_round_trip_is_bit_exact(tmp_path, rng):
    img = random_image(rng, 32, 64)
    path = str(tmp_path / "r.pgm")
    write_pgm(img, path)
    back = read_pgm(path)
    assert np.array_equal(back, img)
    write_pgm(back, str(tmp_path / "r2.pgm"))
    assert (tmp_path / "r.pgm").read_bytes() == (tmp_path / "r2.pgm").read_bytes()


def test_write_one_pixel(tmp_path):
    path = str(tmp_path / "one.pgm")
    write_pgm(np.array([[7.0]]), path)
    assert read_pgm(path).tolist() == [[7.0]]


def test_write_empty_path_fails():
    with pytest.raises(ValueError):
        write_pgm(np.zeros((2, 2)), "")


@pytest.mark.parametrize(
    "data, offset",
    [
        (b"P6\n1 1\n255\n\x00", 0),
        (b"P5\n2 1\n255\n\x00", 12),
        (b"P5\n2 x\n255\n\x00\x00", 5),
        (b"P5\n2 1\n", 7),
    ],
)
def test_malformed_files_report_offset(tmp_path, data, offset):
    with pytest.raises(PgmFormatError) as info:
        read_pgm(_raw(tmp_path, data))
    assert info.value.offset == offset
    assert f"offset {offset}" in str(info.value)


def test_sixteen_bit_rejected_by_read_pgm(tmp_path):
    with pytest.raises(PgmFormatError):
        read_pgm(_raw(tmp_path, b"P5\n1 1\n65535\n\x01\x00"))


def test_disparity_scale_and_invalid(tmp_path):
    payload = np.array([[256, 0, 8192]], dtype=">u2").tobytes()
    d = read_disparity_pgm(_raw(tmp_path, b"P5\n3 1\n65535\n" + payload))
    assert d.tolist() == [[1.0, INVALID_DISPARITY, 32.0]]


def test_disparity_needs_full_range_maxval(tmp_path):
    with pytest.raises(PgmFormatError):
        read_disparity_pgm(_raw(tmp_path, b"P5\n1 1\n4095\n\x00\x01"))


def test_write_disparity_values(tmp_path):
    path = str(tmp_path / "d.pgm")
    write_disparity_map(np.array([[1.0, -1.0, 127.9, 0.0]]), path, 256)
    raw = (tmp_path / "d.pgm").read_bytes()
    stored = np.frombuffer(raw[-8:], dtype=">u2").tolist()
    # round(127.9 * 256) = round(32742.4) = 32742; d = 0 clamps up to 1
    assert stored == [256, 0, 32742, 1]


def test_disparity_round_trip(tmp_path, rng):
    d = rng.integers(0, 128 * 256, size=(6, 9)) / 256.0
    d[0, 0] = INVALID_DISPARITY
    d[d == 0] = 1 / 256
    path = str(tmp_path / "d.pgm")
    write_disparity_map(d, path)
    assert np.array_equal(read_disparity_pgm(path), d)


def test_write_disparity_rejects_bad_scale(tmp_path):
    with pytest.raises(ValueError):
        write_disparity_map(np.zeros((1, 1)), str(tmp_path / "x.pgm"), 0)


def test_matrix_text_round_trip(tmp_path, rng):
    mat = rng.normal(size=(3, 5))
    path = str(tmp_path / "m.txt")
    write_matrix_txt(mat, path)
    assert np.array_equal(read_matrix_txt(path), mat)
    assert (tmp_path / "m.txt").read_text().splitlines()[0] == "3 5"


def test_shift_zero_gives_identical_images():
    ref, tgt = synth_shift_pair(20, 10, 0, seed=3)
    assert np.array_equal(ref, tgt)


def test_shift_relation_holds_on_covered_pixels():
    ref, tgt = synth_shift_pair(40, 12, 5, seed=4)
    assert np.array_equal(ref[:, 5], tgt[:, 0])
    assert np.array_equal(ref[:, 5:], tgt[:, :-5])


def test_synth_is_deterministic():
    a = synth_shift_pair(30, 8, 3, seed=11)
    b = synth_shift_pair(30, 8, 3, seed=11)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_synth_rejects_large_shift():
    with pytest.raises(ValueError):
        synth_shift_pair(10, 4, 10)
