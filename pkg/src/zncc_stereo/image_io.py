"""Binary PGM images, KITTI-style 16-bit disparity maps, text matrices and
synthetic stereo pairs.

Images are plain ``numpy`` arrays of shape ``(height, width)`` holding float64
intensities in ``[0, 255]``. Disparity maps use the same layout with negative
values marking invalid pixels.
"""

from __future__ import annotations

import os

import numpy as np

INVALID_DISPARITY = -1.0

_WHITESPACE = b" \t\r\n\v\f"


class PgmFormatError(ValueError):
    """Raised for malformed or unsupported PGM files."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def as_gray_image(img):
    """Validate ``img`` as a gray image and return it as a float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"gray image must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("gray image contains non-finite values")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("gray image values must lie in [0, 255]")
    return arr


def _parse_header(buf):
    """Return ``(width, height, maxval, payload_offset)`` of a P5 file."""
    if len(buf) < 2 or buf[:2] != b"P5":
        raise PgmFormatError("unsupported magic, expected b'P5'", 0)
    pos = 2
    fields = []
    while len(fields) < 3:
        start = pos
        while pos < len(buf) and (buf[pos] in _WHITESPACE or buf[pos] == ord("#")):
            if buf[pos] == ord("#"):
                while pos < len(buf) and buf[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos == start:
            raise PgmFormatError("expected whitespace in header", pos)
        tok_start = pos
        while pos < len(buf) and buf[pos] not in _WHITESPACE and buf[pos] != ord("#"):
            pos += 1
        token = buf[tok_start:pos]
        if not token:
            raise PgmFormatError("truncated header", tok_start)
        if not token.isdigit():
            raise PgmFormatError(f"invalid header field {token!r}", tok_start)
        fields.append((int(token), tok_start))
    if pos >= len(buf) or buf[pos] not in _WHITESPACE:
        raise PgmFormatError("missing whitespace after maxval", pos)
    (width, w_off), (height, h_off), (maxval, m_off) = fields
    if width <= 0:
        raise PgmFormatError("width must be positive", w_off)
    if height <= 0:
        raise PgmFormatError("height must be positive", h_off)
    if not 0 < maxval <= 65535:
        raise PgmFormatError(f"maxval {maxval} outside 1..65535", m_off)
    return width, height, maxval, m_off, pos + 1


def _read_raw(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    width, height, maxval, maxval_offset, offset = _parse_header(buf)
    sample_bytes = 1 if maxval < 256 else 2
    need = width * height * sample_bytes
    if len(buf) - offset < need:
        raise PgmFormatError(
            f"truncated payload: need {need} bytes, found {len(buf) - offset}", len(buf)
        )
    dtype = np.uint8 if sample_bytes == 1 else np.dtype(">u2")
    data = np.frombuffer(buf, dtype=dtype, count=width * height, offset=offset)
    return data.reshape(height, width), maxval, maxval_offset


def read_pgm(path):
    """Read an 8-bit binary PGM as a float64 gray image."""
    data, maxval, maxval_offset = _read_raw(path)
    if maxval > 255:
        raise PgmFormatError(
            f"maxval {maxval} is a 16-bit image; use read_disparity_pgm", maxval_offset
        )
    return data.astype(np.float64)


def write_pgm(img, path):
    """Write a gray image as an 8-bit binary PGM (values rounded to integers)."""
    if not path:
        raise ValueError("empty output path")
    arr = as_gray_image(img)
    height, width = arr.shape
    payload = np.rint(arr).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(payload.tobytes())


def read_disparity_pgm(path):
    """Read a 16-bit PGM disparity map stored as ``d * 256`` with 0 = invalid."""
    data, maxval, maxval_offset = _read_raw(path)
    if maxval != 65535:
        raise PgmFormatError(f"disparity maps need maxval 65535, got {maxval}", maxval_offset)
    disp = data.astype(np.float64) / 256.0
    disp[data == 0] = INVALID_DISPARITY
    return disp


def write_disparity_map(dmap, path, scale=256.0):
    """Write a disparity map as 16-bit PGM: ``round(d * scale)`` clamped to
    ``[1, 65535]`` for valid pixels, 0 for invalid ones."""
    if not path:
        raise ValueError("empty output path")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    d = np.asarray(dmap, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError("disparity map must be 2-D")
    valid = np.isfinite(d) & (d >= 0)
    stored = np.zeros(d.shape, dtype=np.int64)
    stored[valid] = np.clip(np.rint(d[valid] * scale), 1, 65535)
    height, width = d.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (width, height))
        fh.write(stored.astype(">u2").tobytes())


def read_matrix_txt(path):
    """Read the plain-text fixture format: ``rows cols`` then the values."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    values = tokens[2:]
    if len(values) != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {len(values)}")
    return np.array([float(v) for v in values], dtype=np.float64).reshape(rows, cols)


def write_matrix_txt(mat, path):
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def synth_shift_pair(width, height, shift, seed=0):
    """Make a reference/target pair related by a pure horizontal shift.

    ``reference[y, x] == target[y, x - shift]`` for every ``x >= shift``.
    Reference columns left of ``shift`` and target columns right of
    ``width - shift`` come from texture the other view never sees.
    Texture is seeded uniform noise over the 8-bit range.
    """
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    if not 0 <= shift < width:
        raise ValueError(f"shift must satisfy 0 <= shift < width, got {shift}")
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, size=(height, width + shift)).astype(np.float64)
    reference = base[:, :width].copy()
    target = base[:, shift:shift + width].copy()
    return reference, target


def check_readable(path):
    """Raise FileNotFoundError naming ``path`` if it cannot be opened."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
