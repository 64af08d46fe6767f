"""Bit-level packing primitives shared by the sequence codecs.

Payloads are streams of bits stored in little-endian 64-bit words: bit k of
the stream lives in word k >> 6 at in-word position k & 63.  Serializing a
payload is therefore just dumping the words as little-endian uint64, which
keeps the on-disk format identical across platforms.
"""

from __future__ import annotations

import numpy as np

WORD_BITS = 64

_U64 = np.uint64
_SIXTY_FOUR = _U64(64)
_ONE = _U64(1)


def words_for(nbits: int) -> int:
    return (nbits + WORD_BITS - 1) // WORD_BITS


def bits_to_words(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 uint8 array into little-endian uint64 words."""
    packed = np.packbits(bits, bitorder="little")
    pad = (-len(packed)) % 8
    if pad:
        packed = np.concatenate([packed, np.zeros(pad, dtype=np.uint8)])
    return packed.view("<u8").copy()


def words_to_bits(words: np.ndarray, nbits: int) -> np.ndarray:
    """Unpack words back into a 0/1 uint8 array of length nbits."""
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")
    return bits[:nbits]


def value_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Fixed-width little-endian bit matrix of `values`, flattened."""
    if width == 0 or len(values) == 0:
        return np.zeros(0, dtype=np.uint8)
    v = values.astype(np.uint64, copy=False)
    shifts = np.arange(width, dtype=np.uint64)
    return ((v[:, None] >> shifts[None, :]) & _ONE).astype(np.uint8).ravel()


def read_value(words: np.ndarray, bit_pos: int, width: int) -> int:
    """Read one `width`-bit value starting at `bit_pos` (Python int math)."""
    if width == 0:
        return 0
    wi = bit_pos >> 6
    shift = bit_pos & 63
    v = int(words[wi]) >> shift
    if shift + width > 64:
        v |= int(words[wi + 1]) << (64 - shift)
    return v & ((1 << width) - 1)


def gather_values(words: np.ndarray, bit_positions: np.ndarray, width: int) -> np.ndarray:
    """Vectorized fixed-width reads at arbitrary bit positions."""
    n = len(bit_positions)
    if width == 0 or n == 0:
        return np.zeros(n, dtype=np.uint64)
    pos = bit_positions.astype(np.int64, copy=False)
    wi = pos >> 6
    shift = (pos & 63).astype(np.uint64)
    lo = words[wi] >> shift
    spans = (shift + _U64(width)) > _SIXTY_FOUR
    # the upper word only exists when the read spans two words; clip the
    # index so fully in-word reads at the array edge stay in bounds
    upper_idx = np.minimum(wi + 1, len(words) - 1)
    up_shift = (_SIXTY_FOUR - shift) & _U64(63)
    hi = np.where(spans, words[upper_idx] << up_shift, _U64(0))
    mask = _U64((1 << width) - 1) if width < 64 else _U64(0xFFFFFFFFFFFFFFFF)
    return (lo | hi) & mask


def set_bits(size: int, positions: np.ndarray) -> np.ndarray:
    """0/1 uint8 array of `size` bits with ones at `positions`."""
    bits = np.zeros(size, dtype=np.uint8)
    bits[positions] = 1
    return bits
