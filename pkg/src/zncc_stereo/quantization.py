"""16-bit to 8-bit cost codec and 4-codes-per-word packing.

A code byte keeps six significant bits of a negative 16-bit cost in bits 7..2
and a 2-bit position flag in bits 1..0:

    flag 01   bits[14:9]   used when bits[14:11] != 1111
    flag 10   bits[10:5]   used when bits[14:11] == 1111, bits[10:7] != 1111
    flag 11   bits[6:1]    otherwise

Non-negative values encode to the zero byte. Decoding sets the sign bit, the
bits above the code field to 1 and the bits below it to 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

INT16_MIN = -32768
INT16_MAX = 32767

# flag -> lowest bit of the 6-bit field inside the 16-bit word
_FIELD_SHIFT = {0b01: 9, 0b10: 5, 0b11: 1}


class SaturationCounter:
    """Counts values clipped by saturating integer conversions."""

    def __init__(self):
        self.count = 0

    def add(self, n):
        self.count += int(n)


def encode16(v):
    """Encode one signed 16-bit integer into an 8-bit code."""
    v = int(v)
    if not INT16_MIN <= v <= INT16_MAX:
        raise ValueError(f"{v} is not a 16-bit signed integer")
    if v >= 0:
        return 0
    bits = v & 0xFFFF
    if (bits >> 11) & 0xF != 0xF:
        flag = 0b01
    elif (bits >> 7) & 0xF != 0xF:
        flag = 0b10
    else:
        flag = 0b11
    code = (bits >> _FIELD_SHIFT[flag]) & 0x3F
    return (code << 2) | flag


def decode8(c):
    """Decode an 8-bit code to a signed 16-bit integer.

    A non-zero byte with flag 00 is not produced by ``encode16`` and decodes
    to 0.
    """
    c = int(c) & 0xFF
    flag = c & 0b11
    if c == 0 or flag == 0:
        return 0
    shift = _FIELD_SHIFT[flag]
    code = c >> 2
    ones = (0xFFFF << (shift + 6)) & 0xFFFF
    bits = ones | (code << shift)
    return bits - 0x10000


def encode16_array(values):
    """Vectorised ``encode16`` over an integer array."""
    v = np.asarray(values)
    if v.size and (v.min() < INT16_MIN or v.max() > INT16_MAX):
        raise ValueError("values outside the 16-bit signed range")
    bits = v.astype(np.int64) & 0xFFFF
    hi = (bits >> 11) & 0xF
    mid = (bits >> 7) & 0xF
    flag = np.where(hi != 0xF, 1, np.where(mid != 0xF, 2, 3))
    shift = np.where(flag == 1, 9, np.where(flag == 2, 5, 1))
    code = (bits >> shift) & 0x3F
    out = (code << 2) | flag
    return np.where(v < 0, out, 0).astype(np.uint8)


def decode8_array(codes):
    """Vectorised ``decode8``; returns int16."""
    c = np.asarray(codes).astype(np.int64) & 0xFF
    flag = c & 0b11
    shift = np.where(flag == 1, 9, np.where(flag == 2, 5, 1))
    ones = (0xFFFF << (shift + 6)) & 0xFFFF
    bits = ones | ((c >> 2) << shift)
    out = np.where((c == 0) | (flag == 0), 0, bits - 0x10000)
    return out.astype(np.int16)


def quantize_scale(v, T, counter=None):
    """``round(v * T)`` saturated to the int16 range."""
    if T <= 0:
        raise ValueError(f"scale coefficient must be positive, got {T}")
    q = round(v * T)
    if q < INT16_MIN or q > INT16_MAX:
        if counter is not None:
            counter.add(1)
        q = min(max(q, INT16_MIN), INT16_MAX)
    return q


def saturate(values, dtype, counter=None):
    """Round ``values`` and clip them to the range of integer ``dtype``."""
    info = np.iinfo(dtype)
    q = np.rint(values)
    over = (q < info.min) | (q > info.max)
    if counter is not None:
        counter.add(np.count_nonzero(over))
    return np.clip(q, info.min, info.max).astype(dtype)


def quantize_scale_array(values, T, dtype=np.int16, counter=None):
    """Vectorised ``quantize_scale`` into any integer dtype."""
    if T <= 0:
        raise ValueError(f"scale coefficient must be positive, got {T}")
    return saturate(np.asarray(values, dtype=np.float64) * T, dtype, counter)


def pack4(codes):
    """Pack four code bytes into a 32-bit word; code ``i`` goes to byte ``i``."""
    if len(codes) != 4:
        raise ValueError("pack4 needs exactly four codes")
    word = 0
    for i, c in enumerate(codes):
        if not 0 <= c <= 0xFF:
            raise ValueError(f"code {c} is not a byte")
        word |= int(c) << (8 * i)
    return word


def unpack4(word):
    if not 0 <= word <= 0xFFFFFFFF:
        raise ValueError(f"{word} is not a 32-bit word")
    return tuple((word >> (8 * i)) & 0xFF for i in range(4))


def pack_words(codes):
    """Pack a ``(..., 4*k)`` uint8 array into ``(..., k)`` uint32 words."""
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    if codes.shape[-1] % 4:
        raise ValueError("last axis must be a multiple of 4")
    return codes.view("<u4").astype(np.uint32)


def unpack_words(words):
    words = np.ascontiguousarray(words, dtype="<u4")
    return words.view(np.uint8).reshape(*words.shape[:-1], words.shape[-1] * 4)


@dataclass
class PackedCostVolume:
    """Code bytes of a cost volume, four disparities per little-endian word."""

    width: int
    height: int
    D: int
    words: np.ndarray  # (height, width, ceil(D / 4)) uint32

    @classmethod
    def from_codes(cls, codes):
        h, w, D = codes.shape
        padded = np.zeros((h, w, -(-D // 4) * 4), dtype=np.uint8)
        padded[..., :D] = codes
        return cls(width=w, height=h, D=D, words=pack_words(padded))

    def codes(self):
        return unpack_words(self.words)[..., :self.D]


def encode_volume(cost16):
    """Encode an int16 cost volume and pack it."""
    return PackedCostVolume.from_codes(encode16_array(cost16))


def decode_volume(packed):
    return decode8_array(packed.codes())


_PACKED_HEADER = struct.Struct("<4I")
# header flag word: bit 0 set = codes use the 2-bit position flag format
PACKED_FLAGS = 0x1


def write_packed_volume(packed, path):
    """Dump: ``<u4`` width, height, D, flags then the ``<u4`` words."""
    with open(path, "wb") as fh:
        fh.write(_PACKED_HEADER.pack(packed.width, packed.height, packed.D, PACKED_FLAGS))
        fh.write(np.ascontiguousarray(packed.words, dtype="<u4").tobytes())


def read_packed_volume(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _PACKED_HEADER.size:
        raise ValueError(f"{path}: truncated packed-volume header")
    w, h, D, flags = _PACKED_HEADER.unpack_from(buf)
    if flags != PACKED_FLAGS:
        raise ValueError(f"{path}: unsupported flags {flags:#x}")
    k = -(-D // 4)
    n = w * h * k
    if len(buf) - _PACKED_HEADER.size != 4 * n:
        raise ValueError(f"{path}: expected {4 * n} payload bytes")
    words = np.frombuffer(buf, dtype="<u4", offset=_PACKED_HEADER.size, count=n)
    return PackedCostVolume(width=w, height=h, D=D, words=words.reshape(h, w, k).astype(np.uint32))
