"""3-level tries over one permutation of an integer triple set.

A trie stores the permuted triples as per-level integer sequences: a node
sequence (values) and a pointer sequence (absolute begin positions of each
sibling range in the level below).  The first level is the dense range
0..n-1 and keeps only pointers; the last level keeps only nodes.

Node levels encoded with EF/PEF are stored through the monotone transform
(see :mod:`ptrindex.intseq`); Compact/VByte levels store raw values.  All
reads below recover original values transparently.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import intseq
from .errors import (
    ChildNotFound,
    DuplicateTriple,
    EmptyInput,
    NonDenseFirstLevel,
    OutOfBounds,
    UnsortedInput,
)
from .intseq import Codec, DEFAULT_SCAN_THRESHOLD

#: wildcard slot marker usable inside integer pattern arrays; never a legal ID
WILDCARD = (1 << 63) - 1

TRIE_HEADER_BITS = (1 + 8) * 8


class Permutation(IntEnum):
    """Component order of a stored permutation, as canonical (s, p, o)
    column indexes."""

    SPO = 0
    POS = 1
    OSP = 2
    OPS = 3

    @property
    def columns(self) -> tuple[int, int, int]:
        return _PERM_COLUMNS[self]

    def apply(self, triple):
        c = _PERM_COLUMNS[self]
        return triple[c[0]], triple[c[1]], triple[c[2]]

    def restore(self, permuted):
        c = _PERM_COLUMNS[self]
        out = [0, 0, 0]
        out[c[0]], out[c[1]], out[c[2]] = permuted
        return tuple(out)


_PERM_COLUMNS = {
    Permutation.SPO: (0, 1, 2),
    Permutation.POS: (1, 2, 0),
    Permutation.OSP: (2, 0, 1),
    Permutation.OPS: (2, 1, 0),
}


@dataclass(frozen=True)
class CodecPlan:
    """Codec per level sequence; overridable for experimentation."""

    l0_pointers: Codec = Codec.EF
    l1_nodes: Codec = Codec.PEF
    l1_pointers: Codec = Codec.EF
    l2_nodes: Codec = Codec.PEF


def default_plan(permutation: Permutation, cross_compressed: bool = False) -> CodecPlan:
    """PEF node levels, Compact on the last SPO level, plain EF pointers;
    under cross compression the OSP second level switches to Compact so
    unmap stays a plain random access."""
    l2 = Codec.COMPACT if permutation == Permutation.SPO else Codec.PEF
    l1 = Codec.COMPACT if cross_compressed and permutation == Permutation.OSP else Codec.PEF
    return CodecPlan(l1_nodes=l1, l2_nodes=l2)


@dataclass(frozen=True)
class LevelStats:
    level: int
    avg_children: float
    max_children: int


def _is_transformed(codec: Codec) -> bool:
    return codec in (Codec.EF, Codec.PEF)


def _check_sorted_unique(arr: np.ndarray) -> None:
    if len(arr) < 2:
        return
    d0 = np.diff(arr[:, 0])
    d1 = np.diff(arr[:, 1])
    d2 = np.diff(arr[:, 2])
    tie0 = d0 == 0
    tie01 = tie0 & (d1 == 0)
    if np.any((d0 < 0) | (tie0 & (d1 < 0)) | (tie01 & (d2 < 0))):
        raise UnsortedInput("triples must be sorted in permutation order")
    if np.any(tie01 & (d2 == 0)):
        raise DuplicateTriple("input contains a repeated triple")


class PermutedTrie:
    def __init__(self, permutation, first_level_count, l0_pointers, l1_nodes,
                 l1_pointers, l2_nodes, scan_threshold: int = DEFAULT_SCAN_THRESHOLD):
        self.permutation = Permutation(permutation)
        self.first_level_count = first_level_count
        self.l0_pointers = l0_pointers
        self.l1_nodes = l1_nodes
        self.l1_pointers = l1_pointers
        self.l2_nodes = l2_nodes
        self.scan_threshold = scan_threshold
        self._l1_shifted = _is_transformed(l1_nodes.codec)
        self._l2_shifted = _is_transformed(l2_nodes.codec)

    @classmethod
    def build(cls, triples, permutation, plan: CodecPlan | None = None,
              scan_threshold: int = DEFAULT_SCAN_THRESHOLD) -> "PermutedTrie":
        """Build from triples already permuted, sorted, and de-duplicated.

        First components must densely cover 0..n-1 (dictionary encoding
        guarantees this for full indexes).
        """
        permutation = Permutation(permutation)
        arr = np.asarray(triples, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("expected an (n, 3) triple array")
        n = len(arr)
        if n == 0:
            raise EmptyInput("cannot build a trie from zero triples")
        _check_sorted_unique(arr)
        firsts = arr[:, 0]
        n0 = int(firsts[-1]) + 1
        if int(firsts[0]) != 0 or len(np.unique(firsts)) != n0:
            raise NonDenseFirstLevel("first components must cover 0..n-1")

        row_new = np.empty(n, dtype=bool)
        row_new[0] = True
        if n > 1:
            row_new[1:] = (np.diff(arr[:, 0]) != 0) | (np.diff(arr[:, 1]) != 0)
        pair_starts = np.flatnonzero(row_new)
        l1_vals = arr[pair_starts, 1]
        ptr1 = np.append(pair_starts, n)
        ptr0 = np.searchsorted(firsts[pair_starts], np.arange(n0 + 1))
        l2_vals = arr[:, 2]

        plan = plan or default_plan(permutation)
        assert np.all(np.diff(ptr0) > 0) and np.all(np.diff(ptr1) > 0)

        l1_stored = intseq.make_monotone(l1_vals, ptr0) if _is_transformed(plan.l1_nodes) else l1_vals
        l2_stored = intseq.make_monotone(l2_vals, ptr1) if _is_transformed(plan.l2_nodes) else l2_vals
        return cls(
            permutation,
            n0,
            intseq.encode(ptr0, plan.l0_pointers),
            intseq.encode(l1_stored, plan.l1_nodes),
            intseq.encode(ptr1, plan.l1_pointers),
            intseq.encode(l2_stored, plan.l2_nodes),
            scan_threshold=scan_threshold,
        )

    def __len__(self) -> int:
        return len(self.l2_nodes)

    # -- level primitives ----------------------------------------------------

    def l0_pair(self, first: int) -> tuple[int, int]:
        if not 0 <= first < self.first_level_count:
            raise OutOfBounds(f"first component {first} not in [0, {self.first_level_count})")
        return self.l0_pointers.pair(first)

    def l1_pair(self, pos: int) -> tuple[int, int]:
        return self.l1_pointers.pair(pos)

    def _offset(self, seq, shifted: bool, begin: int) -> int:
        if not shifted or begin == 0:
            return 0
        return seq.access(begin - 1)

    def l1_offset(self, begin: int) -> int:
        return self._offset(self.l1_nodes, self._l1_shifted, begin)

    def l2_offset(self, begin: int) -> int:
        return self._offset(self.l2_nodes, self._l2_shifted, begin)

    def l1_window(self, begin: int, end: int) -> np.ndarray:
        vals = self.l1_nodes.decode_window(begin, end)
        off = self.l1_offset(begin)
        return vals - off if off else vals

    def l2_window(self, begin: int, end: int) -> np.ndarray:
        vals = self.l2_nodes.decode_window(begin, end)
        off = self.l2_offset(begin)
        return vals - off if off else vals

    def l1_find(self, begin: int, end: int, value: int):
        return self.l1_nodes.find(begin, end, value + self.l1_offset(begin), self.scan_threshold)

    def l2_find(self, begin: int, end: int, value: int):
        return self.l2_nodes.find(begin, end, value + self.l2_offset(begin), self.scan_threshold)

    # -- pattern matching ----------------------------------------------------

    def select(self, first: int, second: int | None = None, third: int | None = None):
        """Stream permuted triples matching a prefix pattern in sorted order.

        Shapes: (first, ?, ?), (first, second, ?), (first, second, third).
        An absent prefix yields an empty result.
        """
        if second is None and third is not None:
            raise ValueError("select requires `second` when `third` is given")
        begin, end = self.l0_pair(first)
        if second is None:
            return self._stream(first, begin, end)
        return self._select_prefix(first, begin, end, second, third)

    def _select_prefix(self, first, begin, end, second, third):
        j = self.l1_find(begin, end, second)
        if j is None:
            return
        jb, jk = self.l1_pair(j)
        if third is None:
            for v in self.l2_window(jb, jk).tolist():
                yield (first, second, v)
        elif self.l2_find(jb, jk, third) is not None:
            yield (first, second, third)

    def _stream(self, first, begin, end):
        l1_off = self.l1_offset(begin)
        node_cur = self.l1_nodes.cursor_at(begin)
        ptr_cur = self.l1_pointers.cursor_at(begin)
        j = next(ptr_cur)
        l2_cur = self.l2_nodes.cursor_at(j)
        l2_off = self.l2_offset(j)
        shifted = self._l2_shifted
        for _ in range(begin, end):
            second_val = next(node_cur) - l1_off
            k = next(ptr_cur)
            stored = 0
            for _ in range(k - j):
                stored = next(l2_cur)
                yield (first, second_val, stored - l2_off)
            if shifted and k > j:
                l2_off = stored
            j = k

    def enumerate(self, first: int, third: int):
        """Triples (first, x, third) by probing each child range of `first`
        for `third`; serves S?O without the OSP permutation."""
        begin, end = self.l0_pair(first)
        l1_off = self.l1_offset(begin)
        node_cur = self.l1_nodes.cursor_at(begin)
        ptr_cur = self.l1_pointers.cursor_at(begin)
        j = next(ptr_cur)
        shifted = self._l2_shifted
        l2 = self.l2_nodes
        threshold = self.scan_threshold
        for _ in range(begin, end):
            second_val = next(node_cur)
            k = next(ptr_cur)
            off = self._offset(l2, shifted, j)
            if l2.find(j, k, third + off, threshold) is not None:
                yield (first, second_val - l1_off, third)
            j = k

    # -- child ID remapping (cross compression) -------------------------------

    def map(self, parent: int, child: int) -> int:
        """Position of `child` among the second-level children of `parent`."""
        begin, end = self.l0_pair(parent)
        pos = self.l1_find(begin, end, child)
        if pos is None:
            raise ChildNotFound(f"{child} is not a child of {parent}")
        return pos - begin

    def unmap(self, parent: int, position: int) -> int:
        """Inverse of :meth:`map`: the child ID at a local position."""
        begin, end = self.l0_pair(parent)
        if not 0 <= position < end - begin:
            raise OutOfBounds(f"position {position} not in [0, {end - begin})")
        return self.l1_nodes.access(begin + position) - self.l1_offset(begin)

    # -- whole-trie views ------------------------------------------------------

    def pointer_array(self, level: int) -> np.ndarray:
        if level == 0:
            return self.l0_pointers.decode()
        if level == 1:
            return self.l1_pointers.decode()
        raise ValueError("pointer levels are 0 and 1")

    def node_array(self, level: int) -> np.ndarray:
        """Recovered (untransformed) node values of a level."""
        if level == 1:
            stored = self.l1_nodes.decode()
            if self._l1_shifted:
                return intseq.recover_monotone(stored, self.pointer_array(0))
            return stored
        if level == 2:
            stored = self.l2_nodes.decode()
            if self._l2_shifted:
                return intseq.recover_monotone(stored, self.pointer_array(1))
            return stored
        raise ValueError("node levels are 1 and 2")

    def to_array(self) -> np.ndarray:
        """All indexed triples in permuted sorted order, shape (n, 3)."""
        ptr0 = self.pointer_array(0)
        ptr1 = self.pointer_array(1)
        counts0 = np.diff(ptr0)
        counts1 = np.diff(ptr1)
        first_per_pair = np.repeat(np.arange(self.first_level_count, dtype=np.int64), counts0)
        out = np.empty((len(self), 3), dtype=np.int64)
        out[:, 0] = np.repeat(first_per_pair, counts1)
        out[:, 1] = np.repeat(self.node_array(1), counts1)
        out[:, 2] = self.node_array(2)
        return out

    def __iter__(self):
        for first in range(self.first_level_count):
            yield from self.select(first)

    def level_stats(self, level: int) -> LevelStats:
        lengths = np.diff(self.pointer_array(level - 1))
        return LevelStats(level, float(lengths.mean()), int(lengths.max()))

    # -- serialization -----------------------------------------------------------

    @property
    def size_bits(self) -> int:
        return TRIE_HEADER_BITS + sum(
            s.size_bits for s in (self.l0_pointers, self.l1_nodes, self.l1_pointers, self.l2_nodes)
        )

    def to_bytes(self) -> bytes:
        parts = [bytes([int(self.permutation)]), self.first_level_count.to_bytes(8, "little")]
        for seq in (self.l0_pointers, self.l1_nodes, self.l1_pointers, self.l2_nodes):
            parts.append(intseq.sequence_to_bytes(seq))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf, offset: int = 0,
                   scan_threshold: int = DEFAULT_SCAN_THRESHOLD) -> tuple["PermutedTrie", int]:
        if offset + 9 > len(buf):
            raise OutOfBounds("trie record truncated")
        permutation = Permutation(buf[offset])
        n0 = int.from_bytes(buf[offset + 1:offset + 9], "little")
        pos = offset + 9
        seqs = []
        for _ in range(4):
            seq, pos = intseq.sequence_from_bytes(buf, pos)
            seqs.append(seq)
        return cls(permutation, n0, *seqs, scan_threshold=scan_threshold), pos
