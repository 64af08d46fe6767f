"""Compressed integer sequences with random access, ranged find, and cursors.

Four codecs share one interface:

* ``Codec.COMPACT`` - fixed-width bit packing at the bit length of the
  largest value.  Accepts values in any order.
* ``Codec.EF`` - Elias-Fano over a non-decreasing sequence; constant-time
  access via a select-positions table rebuilt at load time.
* ``Codec.PEF`` - Elias-Fano partitioned into fixed blocks of 256 values,
  each encoded relative to its partition base.  Requires non-decreasing
  input.
* ``Codec.VBYTE`` - variable-byte blocks of 128 values with a per-block
  skip entry (first value, byte offset); blocks whose content is sorted
  are delta-coded.

A plain sequence is any list/array of non-negative integers together with
its universe (smallest U with every value < U).  Node levels of the tries
that must be fed to EF/PEF first pass through :func:`make_monotone`, which
shifts each sibling range by the running prefix so the whole stream becomes
non-decreasing; :func:`recover_monotone` is the exact inverse.

Encoded sequences are immutable; any number of threads may read one
concurrently.  Cursors hold per-reader state and must not be shared.
"""

from __future__ import annotations

import struct
from enum import IntEnum

import numpy as np

from . import bits
from .errors import (
    NonMonotoneInput,
    OutOfBounds,
    RangeNotSorted,
    UniverseOverflow,
)

DEFAULT_SCAN_THRESHOLD = 16

PEF_PARTITION = 256
VBYTE_BLOCK = 128

#: serialized record header: codec tag, length, universe, payload bit count
RECORD_HEADER = struct.Struct("<BQQQ")
RECORD_HEADER_BITS = RECORD_HEADER.size * 8

MAX_UNIVERSE = 1 << 62


class Codec(IntEnum):
    COMPACT = 0
    EF = 1
    PEF = 2
    VBYTE = 3


_CODEC_ALIASES = {
    "compact": Codec.COMPACT,
    "ef": Codec.EF,
    "pef": Codec.PEF,
    "vbyte": Codec.VBYTE,
}


def as_codec(codec) -> Codec:
    if isinstance(codec, Codec):
        return codec
    if isinstance(codec, str):
        try:
            return _CODEC_ALIASES[codec.lower()]
        except KeyError:
            raise ValueError(f"unknown codec {codec!r}") from None
    return Codec(codec)


def _as_values(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise ValueError("sequence values must be integers")
    arr = arr.astype(np.int64, copy=False)
    if arr.size and int(arr.min()) < 0:
        raise ValueError("sequence values must be non-negative")
    return arr


def _resolve_universe(values: np.ndarray, universe) -> int:
    top = int(values.max()) if len(values) else -1
    if universe is None:
        universe = top + 1
    universe = int(universe)
    if universe > MAX_UNIVERSE:
        raise UniverseOverflow(f"universe {universe} exceeds {MAX_UNIVERSE}")
    if top >= universe:
        raise UniverseOverflow(f"value {top} does not fit in universe {universe}")
    return universe


def ef_low_bits(n: int, universe: int) -> int:
    """Number of low bits per value: floor(log2(universe / n)), min 0."""
    if n <= 0:
        return 0
    return max(0, (universe // n).bit_length() - 1)


class EncodedSequence:
    """Common surface of the four codecs."""

    codec: Codec

    def __init__(self, length: int, universe: int, payload_bits: int, words: np.ndarray):
        self._n = length
        self._universe = universe
        self._payload_bits = payload_bits
        self._words = words

    def __len__(self) -> int:
        return self._n

    @property
    def universe(self) -> int:
        return self._universe

    @property
    def payload_bits(self) -> int:
        return self._payload_bits

    @property
    def size_bits(self) -> int:
        """Payload plus the fixed record header."""
        return RECORD_HEADER_BITS + self._payload_bits

    # -- random access -----------------------------------------------------

    def access(self, i: int) -> int:
        raise NotImplementedError

    def pair(self, i: int) -> tuple[int, int]:
        """Adjacent values (self[i], self[i+1]); the pointer-pair idiom."""
        w = self.decode_window(i, i + 2)
        return int(w[0]), int(w[1])

    def decode_window(self, a: int, b: int) -> np.ndarray:
        """Values at positions [a, b) as an int64 array."""
        raise NotImplementedError

    def decode(self) -> np.ndarray:
        return self.decode_window(0, self._n)

    def _check_pos(self, i: int, upper: int) -> None:
        if not 0 <= i < upper:
            raise OutOfBounds(f"position {i} not in [0, {upper})")

    # -- searching ----------------------------------------------------------

    def find(self, i: int, j: int, x: int, threshold: int | None = None):
        """Absolute position of `x` inside the sorted range [i, j), else None.

        Short ranges are scanned; longer ones are binary searched through
        random access.
        """
        if not 0 <= i <= j <= self._n:
            raise OutOfBounds(f"range [{i}, {j}) not within [0, {self._n}]")
        if i == j:
            return None
        if threshold is None:
            threshold = DEFAULT_SCAN_THRESHOLD
        if j - i <= threshold:
            vals = self.decode_window(i, j)
            k = int(np.searchsorted(vals, x))
            if k < len(vals) and int(vals[k]) == x:
                return i + k
            return None
        lo, hi = i, j - 1
        while lo <= hi:
            mid = (lo + hi) >> 1
            v = self.access(mid)
            if v == x:
                return mid
            if v < x:
                lo = mid + 1
            else:
                hi = mid - 1
        return None

    # -- iteration ----------------------------------------------------------

    def cursor_at(self, i: int):
        """Iterator over values from position i to the end."""
        if not 0 <= i <= self._n:
            raise OutOfBounds(f"cursor start {i} not in [0, {self._n}]")
        return self._cursor(i)

    def _cursor(self, i: int, chunk: int = 512):
        pos = i
        n = self._n
        while pos < n:
            stop = min(n, pos + chunk)
            yield from self.decode_window(pos, stop).tolist()
            pos = stop

    def __iter__(self):
        return self._cursor(0)

    # -- serialization ------------------------------------------------------

    def payload_words(self) -> np.ndarray:
        return self._words[: bits.words_for(self._payload_bits)]


class CompactSequence(EncodedSequence):
    """Fixed-width packing; width = bit length of the maximum value (min 1)."""

    codec = Codec.COMPACT

    def __init__(self, length, universe, payload_bits, words):
        super().__init__(length, universe, payload_bits, words)
        self._width = payload_bits // length if length else 0

    @classmethod
    def _encode(cls, values: np.ndarray, universe: int) -> "CompactSequence":
        n = len(values)
        width = max(1, int(values.max()).bit_length()) if n else 0
        words = bits.bits_to_words(bits.value_bits(values, width))
        return cls(n, universe, n * width, words)

    @classmethod
    def _from_payload(cls, length, universe, payload_bits, words):
        return cls(length, universe, payload_bits, words)

    def access(self, i: int) -> int:
        self._check_pos(i, self._n)
        return bits.read_value(self._words, i * self._width, self._width)

    def decode_window(self, a: int, b: int) -> np.ndarray:
        positions = np.arange(a, b, dtype=np.int64) * self._width
        return bits.gather_values(self._words, positions, self._width).astype(np.int64)


class EliasFanoSequence(EncodedSequence):
    """Plain Elias-Fano; payload is low bits followed by the high bit vector."""

    codec = Codec.EF

    def __init__(self, length, universe, payload_bits, words):
        super().__init__(length, universe, payload_bits, words)
        n, u = length, universe
        self._l = ef_low_bits(n, u)
        self._high_base = n * self._l
        high_size = n + (u >> self._l) + 1 if n else 0
        if n:
            high = bits.words_to_bits(words, self._high_base + high_size)[self._high_base:]
            self._ones = np.flatnonzero(high).astype(np.int64)
        else:
            self._ones = np.zeros(0, dtype=np.int64)

    @classmethod
    def _encode(cls, values: np.ndarray, universe: int) -> "EliasFanoSequence":
        n = len(values)
        if n and np.any(np.diff(values) < 0):
            raise NonMonotoneInput("Elias-Fano requires non-decreasing values")
        if n == 0:
            return cls(0, universe, 0, np.zeros(0, dtype=np.uint64))
        l = ef_low_bits(n, universe)
        high_size = n + (universe >> l) + 1
        low_bits = bits.value_bits(values & ((1 << l) - 1), l)
        ones = (values >> l) + np.arange(n, dtype=np.int64)
        payload = np.concatenate([low_bits, bits.set_bits(high_size, ones)])
        return cls(n, universe, len(payload), bits.bits_to_words(payload))

    @classmethod
    def _from_payload(cls, length, universe, payload_bits, words):
        return cls(length, universe, payload_bits, words)

    def _low(self, i: int) -> int:
        if self._l == 0:
            return 0
        return bits.read_value(self._words, i * self._l, self._l)

    def access(self, i: int) -> int:
        self._check_pos(i, self._n)
        return ((int(self._ones[i]) - i) << self._l) | self._low(i)

    def pair(self, i: int) -> tuple[int, int]:
        self._check_pos(i + 1, self._n)
        l = self._l
        hi0 = (int(self._ones[i]) - i) << l
        hi1 = (int(self._ones[i + 1]) - i - 1) << l
        return hi0 | self._low(i), hi1 | self._low(i + 1)

    def decode_window(self, a: int, b: int) -> np.ndarray:
        idx = np.arange(a, b, dtype=np.int64)
        highs = self._ones[a:b] - idx
        if self._l == 0:
            return highs
        lows = bits.gather_values(self._words, idx * self._l, self._l).astype(np.int64)
        return (highs << self._l) | lows


class PartitionedEliasFanoSequence(EncodedSequence):
    """Elias-Fano in fixed partitions of 256 values, relative to local bases.

    Payload: base width (8 bits) | bound width (8 bits) | packed partition
    bases | packed partition upper bounds | concatenated partition EF
    payloads.  Partition offsets are recomputed from the lengths, so the
    skip table stores only values.
    """

    codec = Codec.PEF

    def __init__(self, length, universe, payload_bits, words):
        super().__init__(length, universe, payload_bits, words)
        n = length
        if n == 0:
            self._bases = np.zeros(0, dtype=np.int64)
            self._ls = np.zeros(0, dtype=np.int64)
            self._offsets = np.zeros(0, dtype=np.int64)
            self._ones = []
            return
        p = (n + PEF_PARTITION - 1) // PEF_PARTITION
        bw = bits.read_value(words, 0, 8)
        uw = bits.read_value(words, 8, 8)
        base_off = 16
        bound_off = base_off + p * bw
        part_off = bound_off + p * uw
        idx = np.arange(p, dtype=np.int64)
        bases = bits.gather_values(words, base_off + idx * bw, bw).astype(np.int64)
        bounds = bits.gather_values(words, bound_off + idx * uw, uw).astype(np.int64)
        sizes = np.zeros(p, dtype=np.int64)
        ls = np.zeros(p, dtype=np.int64)
        counts = np.full(p, PEF_PARTITION, dtype=np.int64)
        counts[-1] = n - PEF_PARTITION * (p - 1)
        for k in range(p):
            nk = int(counts[k])
            uk = int(bounds[k] - bases[k]) + 1
            lk = ef_low_bits(nk, uk)
            ls[k] = lk
            sizes[k] = nk * lk + nk + (uk >> lk) + 1
        offsets = part_off + np.concatenate([[0], np.cumsum(sizes[:-1])])
        all_bits = bits.words_to_bits(words, payload_bits)
        ones = []
        for k in range(p):
            nk = int(counts[k])
            high_start = int(offsets[k]) + nk * int(ls[k])
            hsize = int(sizes[k]) - nk * int(ls[k])
            ones.append(np.flatnonzero(all_bits[high_start:high_start + hsize]).astype(np.int64))
        self._bases = bases
        self._ls = ls
        self._offsets = offsets
        self._counts = counts
        self._ones = ones

    @classmethod
    def _encode(cls, values: np.ndarray, universe: int) -> "PartitionedEliasFanoSequence":
        n = len(values)
        if n and np.any(np.diff(values) < 0):
            raise NonMonotoneInput("partitioned Elias-Fano requires non-decreasing values")
        if n == 0:
            return cls(0, universe, 0, np.zeros(0, dtype=np.uint64))
        p = (n + PEF_PARTITION - 1) // PEF_PARTITION
        bases = values[::PEF_PARTITION].copy()
        bounds = np.concatenate([values[PEF_PARTITION - 1::PEF_PARTITION], values[-1:]])[:p]
        bw = max(1, int(bases.max()).bit_length())
        uw = max(1, int(bounds.max()).bit_length())
        chunks = [
            bits.value_bits(np.array([bw], dtype=np.int64), 8),
            bits.value_bits(np.array([uw], dtype=np.int64), 8),
            bits.value_bits(bases, bw),
            bits.value_bits(bounds, uw),
        ]
        for k in range(p):
            part = values[k * PEF_PARTITION:(k + 1) * PEF_PARTITION] - bases[k]
            nk = len(part)
            uk = int(part[-1]) + 1
            lk = ef_low_bits(nk, uk)
            high_size = nk + (uk >> lk) + 1
            ones = (part >> lk) + np.arange(nk, dtype=np.int64)
            chunks.append(bits.value_bits(part & ((1 << lk) - 1), lk))
            chunks.append(bits.set_bits(high_size, ones))
        payload = np.concatenate(chunks)
        return cls(n, universe, len(payload), bits.bits_to_words(payload))

    @classmethod
    def _from_payload(cls, length, universe, payload_bits, words):
        return cls(length, universe, payload_bits, words)

    def access(self, i: int) -> int:
        self._check_pos(i, self._n)
        k, r = i >> 8, i & (PEF_PARTITION - 1)
        l = int(self._ls[k])
        high = (int(self._ones[k][r]) - r) << l
        if l:
            high |= bits.read_value(self._words, int(self._offsets[k]) + r * l, l)
        return int(self._bases[k]) + high

    def decode_window(self, a: int, b: int) -> np.ndarray:
        if a >= b:
            return np.zeros(0, dtype=np.int64)
        parts = []
        k = a >> 8
        while k * PEF_PARTITION < b:
            ra = max(a, k * PEF_PARTITION) - k * PEF_PARTITION
            rb = min(b, k * PEF_PARTITION + int(self._counts[k])) - k * PEF_PARTITION
            idx = np.arange(ra, rb, dtype=np.int64)
            l = int(self._ls[k])
            highs = self._ones[k][ra:rb] - idx
            if l:
                lows = bits.gather_values(
                    self._words, int(self._offsets[k]) + idx * l, l
                ).astype(np.int64)
                vals = (highs << l) | lows
            else:
                vals = highs
            parts.append(vals + int(self._bases[k]))
            k += 1
        return parts[0] if len(parts) == 1 else np.concatenate(parts)


class VByteSequence(EncodedSequence):
    """Variable-byte blocks of 128 values with (first value, offset) skips.

    A block stores a flag byte then varints for its 2nd..last values: raw
    when the block is unsorted, deltas when it is non-decreasing.  The first
    value of each block lives in the skip table, so access and find decode
    a single block.
    """

    codec = Codec.VBYTE

    def __init__(self, length, universe, payload_bits, words):
        super().__init__(length, universe, payload_bits, words)
        n = length
        self._buf = words.view(np.uint8).tobytes()[: payload_bits // 8]
        nblocks = (n + VBYTE_BLOCK - 1) // VBYTE_BLOCK
        self._nblocks = nblocks
        if nblocks:
            skip = np.frombuffer(self._buf[: nblocks * 16], dtype="<u8").reshape(-1, 2)
            self._firsts = skip[:, 0].astype(np.int64)
            self._boffs = skip[:, 1].astype(np.int64) + nblocks * 16
        else:
            self._firsts = np.zeros(0, dtype=np.int64)
            self._boffs = np.zeros(0, dtype=np.int64)

    @staticmethod
    def _varint(value: int, out: bytearray) -> None:
        while True:
            b = value & 0x7F
            value >>= 7
            if value:
                out.append(b | 0x80)
            else:
                out.append(b)
                return

    @classmethod
    def _encode(cls, values: np.ndarray, universe: int) -> "VByteSequence":
        n = len(values)
        if n == 0:
            return cls(0, universe, 0, np.zeros(0, dtype=np.uint64))
        nblocks = (n + VBYTE_BLOCK - 1) // VBYTE_BLOCK
        blocks = bytearray()
        skip = bytearray()
        for b in range(nblocks):
            part = values[b * VBYTE_BLOCK:(b + 1) * VBYTE_BLOCK]
            skip += struct.pack("<QQ", int(part[0]), len(blocks))
            sorted_block = bool(np.all(np.diff(part) >= 0)) if len(part) > 1 else True
            blocks.append(1 if sorted_block else 0)
            items = np.diff(part) if sorted_block else part[1:]
            for v in items.tolist():
                cls._varint(v, blocks)
        buf = bytes(skip) + bytes(blocks)
        pad = (-len(buf)) % 8
        words = np.frombuffer(buf + b"\x00" * pad, dtype="<u8").astype(np.uint64)
        return cls(n, universe, len(buf) * 8, words)

    @classmethod
    def _from_payload(cls, length, universe, payload_bits, words):
        return cls(length, universe, payload_bits, words)

    def _block_len(self, b: int) -> int:
        if b == self._nblocks - 1:
            return self._n - b * VBYTE_BLOCK
        return VBYTE_BLOCK

    def _decode_block(self, b: int) -> np.ndarray:
        buf = self._buf
        pos = int(self._boffs[b])
        count = self._block_len(b)
        sorted_block = buf[pos]
        pos += 1
        out = np.empty(count, dtype=np.int64)
        cur = int(self._firsts[b])
        out[0] = cur
        for t in range(1, count):
            v = 0
            shift = 0
            while True:
                byte = buf[pos]
                pos += 1
                v |= (byte & 0x7F) << shift
                if not byte & 0x80:
                    break
                shift += 7
            cur = cur + v if sorted_block else v
            out[t] = cur
        return out

    def access(self, i: int) -> int:
        self._check_pos(i, self._n)
        return int(self._decode_block(i >> 7)[i & (VBYTE_BLOCK - 1)])

    def decode_window(self, a: int, b: int) -> np.ndarray:
        if a >= b:
            return np.zeros(0, dtype=np.int64)
        parts = []
        k = a >> 7
        while k * VBYTE_BLOCK < b:
            block = self._decode_block(k)
            ra = max(a, k * VBYTE_BLOCK) - k * VBYTE_BLOCK
            rb = min(b, k * VBYTE_BLOCK + len(block)) - k * VBYTE_BLOCK
            parts.append(block[ra:rb])
            k += 1
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def find(self, i: int, j: int, x: int, threshold: int | None = None):
        if not 0 <= i <= j <= self._n:
            raise OutOfBounds(f"range [{i}, {j}) not within [0, {self._n}]")
        if i == j:
            return None
        bi, bj = i >> 7, (j - 1) >> 7
        if bi == bj:
            block = self._decode_block(bi)
            ra, rb = i - bi * VBYTE_BLOCK, j - bi * VBYTE_BLOCK
            k = int(np.searchsorted(block[ra:rb], x))
            if k < rb - ra and int(block[ra + k]) == x:
                return i + k
            return None
        # block firsts strictly inside the range are range values, hence
        # sorted: narrow down to the one candidate block, then scan it
        inner = self._firsts[bi + 1:bj + 1]
        c = bi + int(np.searchsorted(inner, x, side="right"))
        lo = max(i, c * VBYTE_BLOCK)
        hi = min(j, c * VBYTE_BLOCK + self._block_len(c))
        block = self._decode_block(c)
        ra, rb = lo - c * VBYTE_BLOCK, hi - c * VBYTE_BLOCK
        k = int(np.searchsorted(block[ra:rb], x))
        if k < rb - ra and int(block[ra + k]) == x:
            return lo + k
        return None


_CODEC_CLASSES = {
    Codec.COMPACT: CompactSequence,
    Codec.EF: EliasFanoSequence,
    Codec.PEF: PartitionedEliasFanoSequence,
    Codec.VBYTE: VByteSequence,
}


def encode(values, codec, universe=None) -> EncodedSequence:
    """Encode values with the given codec; raises on codec precondition
    violations (non-monotone input for EF/PEF, universe overflow)."""
    arr = _as_values(values)
    u = _resolve_universe(arr, universe)
    return _CODEC_CLASSES[as_codec(codec)]._encode(arr, u)


# -- monotone prefix-sum transform ------------------------------------------


def _check_boundaries(boundaries: np.ndarray, length: int) -> None:
    if len(boundaries) < 1 or boundaries[0] != 0 or boundaries[-1] != length:
        raise ValueError("boundaries must start at 0 and end at the sequence length")
    if np.any(np.diff(boundaries) < 0):
        raise ValueError("boundaries must be non-decreasing")


def make_monotone(values, boundaries) -> np.ndarray:
    """Shift each sibling range by the running last stored value, producing
    a globally non-decreasing sequence suitable for EF/PEF."""
    vals = _as_values(values)
    bnd = np.asarray(boundaries, dtype=np.int64)
    _check_boundaries(bnd, len(vals))
    if len(vals) == 0:
        return vals.copy()
    inner = bnd[1:-1]
    exempt = np.zeros(max(len(vals) - 1, 0), dtype=bool)
    ok = (inner > 0) & (inner < len(vals))
    exempt[inner[ok] - 1] = True
    d = np.diff(vals)
    if np.any(d[~exempt] <= 0):
        raise RangeNotSorted("values within a range must be strictly increasing")
    lengths = np.diff(bnd)
    last_raw = np.zeros(len(lengths), dtype=np.int64)
    nonempty = lengths > 0
    last_raw[nonempty] = vals[bnd[1:][nonempty] - 1]
    offsets = np.concatenate([[0], np.cumsum(last_raw[:-1])])
    return vals + np.repeat(offsets, lengths)


def recover_monotone(stored, boundaries) -> np.ndarray:
    """Exact inverse of :func:`make_monotone`: the offset of a range is the
    stored value just before its begin position (0 for position 0)."""
    vals = np.asarray(stored, dtype=np.int64)
    bnd = np.asarray(boundaries, dtype=np.int64)
    _check_boundaries(bnd, len(vals))
    if len(vals) == 0:
        return vals.copy()
    begins = bnd[:-1]
    offsets = np.where(begins > 0, vals[begins - 1], 0)
    return vals - np.repeat(offsets, np.diff(bnd))


# -- serialized records ------------------------------------------------------


def sequence_to_bytes(seq: EncodedSequence) -> bytes:
    header = RECORD_HEADER.pack(int(seq.codec), len(seq), seq.universe, seq.payload_bits)
    return header + seq.payload_words().astype("<u8").tobytes()


def sequence_from_bytes(buf, offset: int = 0) -> tuple[EncodedSequence, int]:
    """Parse one record at `offset`; returns the sequence and the offset
    just past it."""
    end = offset + RECORD_HEADER.size
    if end > len(buf):
        raise OutOfBounds("sequence record header truncated")
    tag, length, universe, payload_bits = RECORD_HEADER.unpack_from(buf, offset)
    nbytes = bits.words_for(payload_bits) * 8
    if end + nbytes > len(buf):
        raise OutOfBounds("sequence record payload truncated")
    words = np.frombuffer(buf, dtype="<u8", count=nbytes // 8, offset=end).astype(np.uint64)
    cls = _CODEC_CLASSES[Codec(tag)]
    return cls._from_payload(length, universe, payload_bits, words), end + nbytes
