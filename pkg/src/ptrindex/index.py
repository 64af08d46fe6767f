"""Index layouts, pattern dispatch, and container serialization.

Four layouts bundle permuted tries:

* ``THREE_T`` - tries SPO, POS, OSP; every pattern shape served by select.
* ``CC``      - same tries, but POS leaf subjects are rewritten as positions
  inside the matching OSP object sub-tree (they are a subset of it), and the
  OSP second level switches to Compact so the rewrite is undone with one
  random access per matched triple.
* ``TWO_T_P`` - tries SPO, POS only; S?O runs `enumerate` on SPO and ??O runs
  the predicate-probing inverted procedure over POS.
* ``TWO_T_O`` - tries SPO, OPS plus a predicate->subjects table (PS); ?P?
  expands PS entries through SP? lookups on SPO.

Queries take a canonical (s, p, o) pattern with None (or ``WILDCARD``) in
wildcard slots and yield canonical triples; each serving trie yields in its
own sorted order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import intseq
from .errors import CorruptContainer, EmptyInput, IdOutOfRange, VersionMismatch
from .intseq import Codec, DEFAULT_SCAN_THRESHOLD
from .trie import WILDCARD, CodecPlan, PermutedTrie, Permutation, default_plan

MAGIC = b"PTRIDX01"
_MAGIC_FAMILY = b"PTRIDX"
_COUNTS = struct.Struct("<5Q")
CONTAINER_HEADER_BITS = (len(MAGIC) + 1 + _COUNTS.size) * 8
CRC_BITS = 64


class IndexLayout(IntEnum):
    THREE_T = 0
    CC = 1
    TWO_T_P = 2
    TWO_T_O = 3


_LAYOUT_ALIASES = {
    "3t": IndexLayout.THREE_T,
    "cc": IndexLayout.CC,
    "2tp": IndexLayout.TWO_T_P,
    "2to": IndexLayout.TWO_T_O,
}
LAYOUT_NAMES = {v: k for k, v in _LAYOUT_ALIASES.items()}

#: tries materialized per layout, in container order
LAYOUT_TRIES = {
    IndexLayout.THREE_T: (Permutation.SPO, Permutation.POS, Permutation.OSP),
    IndexLayout.CC: (Permutation.SPO, Permutation.POS, Permutation.OSP),
    IndexLayout.TWO_T_P: (Permutation.SPO, Permutation.POS),
    IndexLayout.TWO_T_O: (Permutation.SPO, Permutation.OPS),
}

ALL_SHAPES = ("SPO", "SP?", "S??", "S?O", "?PO", "?P?", "??O", "???")


def as_layout(layout) -> IndexLayout:
    if isinstance(layout, IndexLayout):
        return layout
    if isinstance(layout, str):
        try:
            return _LAYOUT_ALIASES[layout.lower()]
        except KeyError:
            raise ValueError(f"unknown layout {layout!r}") from None
    return IndexLayout(layout)


# -- CRC-64 trailer (XZ polynomial, reflected) ---------------------------------

_CRC64_POLY = 0xC96C5795D7870F42


def _crc64_table():
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ (_CRC64_POLY if crc & 1 else 0)
        table.append(crc)
    return table


_CRC64_TABLE = _crc64_table()


def crc64(data: bytes) -> int:
    crc = 0xFFFFFFFFFFFFFFFF
    table = _CRC64_TABLE
    for b in data:
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


# -- pattern helpers -------------------------------------------------------------


def normalize_pattern(pattern) -> tuple:
    """(s, p, o) with None in wildcard slots; accepts None or WILDCARD."""
    if len(pattern) != 3:
        raise ValueError("a pattern has exactly three component slots")
    out = []
    for c in pattern:
        if c is None or c == WILDCARD:
            out.append(None)
        else:
            out.append(int(c))
    return tuple(out)


def shape_of(pattern) -> str:
    s, p, o = normalize_pattern(pattern)
    return ("S" if s is not None else "?") + ("P" if p is not None else "?") + (
        "O" if o is not None else "?"
    )


@dataclass(frozen=True)
class QueryPlan:
    algorithm: str  # select | enumerate | inverted_object | inverted_predicate
    permutation: Permutation  # the serving trie


_COMMON_PLANS = {
    "SPO": QueryPlan("select", Permutation.SPO),
    "SP?": QueryPlan("select", Permutation.SPO),
    "S??": QueryPlan("select", Permutation.SPO),
    "???": QueryPlan("select", Permutation.SPO),
}

_DISPATCH = {
    IndexLayout.THREE_T: {
        **_COMMON_PLANS,
        "?PO": QueryPlan("select", Permutation.POS),
        "?P?": QueryPlan("select", Permutation.POS),
        "S?O": QueryPlan("select", Permutation.OSP),
        "??O": QueryPlan("select", Permutation.OSP),
    },
    IndexLayout.TWO_T_P: {
        **_COMMON_PLANS,
        "?PO": QueryPlan("select", Permutation.POS),
        "?P?": QueryPlan("select", Permutation.POS),
        "S?O": QueryPlan("enumerate", Permutation.SPO),
        "??O": QueryPlan("inverted_object", Permutation.POS),
    },
    IndexLayout.TWO_T_O: {
        **_COMMON_PLANS,
        "?PO": QueryPlan("select", Permutation.OPS),
        "??O": QueryPlan("select", Permutation.OPS),
        "?P?": QueryPlan("inverted_predicate", Permutation.SPO),
        "S?O": QueryPlan("enumerate", Permutation.SPO),
    },
}
_DISPATCH[IndexLayout.CC] = dict(_DISPATCH[IndexLayout.THREE_T])


def dispatch(layout, shape: str) -> QueryPlan:
    """The serving trie and algorithm for a pattern shape on a layout."""
    try:
        return _DISPATCH[as_layout(layout)][shape]
    except KeyError:
        raise ValueError(f"unknown pattern shape {shape!r}") from None


# -- PS structure (predicate -> sorted subjects) -----------------------------------


class PSStructure:
    """Two-level table: EF pointers into one PEF subject sequence."""

    def __init__(self, pointers, subjects):
        self.pointers = pointers
        self.subjects = subjects

    @classmethod
    def build(cls, ps_pairs: np.ndarray, n_predicates: int) -> "PSStructure":
        """From sorted distinct (predicate, subject) pairs."""
        ptr = np.searchsorted(ps_pairs[:, 0], np.arange(n_predicates + 1))
        stored = intseq.make_monotone(ps_pairs[:, 1], ptr)
        return cls(intseq.encode(ptr, Codec.EF), intseq.encode(stored, Codec.PEF))

    def __len__(self) -> int:
        return len(self.subjects)

    def subjects_for(self, p: int) -> np.ndarray:
        b, e = self.pointers.pair(p)
        vals = self.subjects.decode_window(b, e)
        if b > 0:
            vals = vals - self.subjects.access(b - 1)
        return vals

    @property
    def size_bits(self) -> int:
        return self.pointers.size_bits + self.subjects.size_bits

    def to_bytes(self) -> bytes:
        return intseq.sequence_to_bytes(self.pointers) + intseq.sequence_to_bytes(self.subjects)

    @classmethod
    def from_bytes(cls, buf, offset: int = 0) -> tuple["PSStructure", int]:
        pointers, offset = intseq.sequence_from_bytes(buf, offset)
        subjects, offset = intseq.sequence_from_bytes(buf, offset)
        return cls(pointers, subjects), offset


# -- stats -------------------------------------------------------------------------


@dataclass(frozen=True)
class SequenceStats:
    trie: str
    sequence: str
    codec: str
    bits: int
    bits_per_triple: float
    pct_of_total: float


@dataclass(frozen=True)
class FanoutStats:
    trie: str
    level: int
    avg_children: float
    max_children: int


@dataclass(frozen=True)
class IndexStats:
    layout: str
    triples: int
    subjects: int
    predicates: int
    objects: int
    sp_pairs: int
    po_pairs: int
    os_pairs: int
    total_bits: int
    bits_per_triple: float
    sequences: list
    fanout: list


@dataclass(frozen=True)
class Counts:
    triples: int
    subjects: int
    predicates: int
    objects: int


# -- the index -----------------------------------------------------------------------


class RdfIndex:
    def __init__(self, layout, tries, counts: Counts, ps: PSStructure | None = None):
        self.layout = as_layout(layout)
        self.tries = tries
        self.counts = counts
        self.ps = ps

    # -- construction ----------------------------------------------------------------

    @classmethod
    def build(cls, triples, layout) -> "RdfIndex":
        """Sort, de-duplicate, and materialize the layout's tries.

        Component IDs must be dense (every ID below the component's distinct
        count occurs); dictionary encoding produces exactly that.
        """
        layout = as_layout(layout)
        arr = np.asarray(triples, dtype=np.int64)
        if arr.size == 0:
            raise EmptyInput("cannot build an index from zero triples")
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("expected an (n, 3) triple array")
        if int(arr.min()) < 0:
            raise IdOutOfRange("component IDs must be non-negative")
        arr = np.unique(arr, axis=0)

        sizes = []
        for c in range(3):
            distinct = np.unique(arr[:, c])
            if int(distinct[-1]) != len(distinct) - 1:
                raise IdOutOfRange(
                    f"component {c} IDs must densely cover 0..{len(distinct) - 1}"
                )
            sizes.append(len(distinct))
        counts = Counts(len(arr), *sizes)

        cc = layout == IndexLayout.CC
        tries = {}
        for perm in LAYOUT_TRIES[layout]:
            cols = list(perm.columns)
            parr = arr[:, cols]
            parr = parr[np.lexsort((parr[:, 2], parr[:, 1], parr[:, 0]))]
            if cc and perm == Permutation.POS:
                parr = parr.copy()
                parr[:, 2] = cls._cc_mapped_subjects(arr, parr, counts)
            tries[perm] = PermutedTrie.build(parr, perm, plan=default_plan(perm, cc))

        ps = None
        if layout == IndexLayout.TWO_T_O:
            ps_pairs = np.unique(arr[:, [1, 0]], axis=0)
            ps = PSStructure.build(ps_pairs, counts.predicates)
        return cls(layout, tries, counts, ps)

    @staticmethod
    def _cc_mapped_subjects(arr, pos_sorted, counts: Counts) -> np.ndarray:
        """Rewrite POS leaf subjects as ranks inside the OSP object sub-tree."""
        os_pairs = np.unique(arr[:, [2, 0]], axis=0)
        starts = np.searchsorted(os_pairs[:, 0], np.arange(counts.objects + 1))
        rank_within = np.arange(len(os_pairs)) - np.repeat(starts[:-1], np.diff(starts))
        key_span = counts.subjects
        pair_keys = os_pairs[:, 0] * key_span + os_pairs[:, 1]
        triple_keys = pos_sorted[:, 1] * key_span + pos_sorted[:, 2]
        return rank_within[np.searchsorted(pair_keys, triple_keys)]

    # -- queries -----------------------------------------------------------------------

    def _validate(self, s, p, o):
        if s is not None and not 0 <= s < self.counts.subjects:
            raise IdOutOfRange(f"subject {s} not in [0, {self.counts.subjects})")
        if p is not None and not 0 <= p < self.counts.predicates:
            raise IdOutOfRange(f"predicate {p} not in [0, {self.counts.predicates})")
        if o is not None and not 0 <= o < self.counts.objects:
            raise IdOutOfRange(f"object {o} not in [0, {self.counts.objects})")

    def query(self, pattern):
        """Iterator of canonical (s, p, o) triples matching the pattern."""
        s, p, o = normalize_pattern(pattern)
        self._validate(s, p, o)
        plan = dispatch(self.layout, shape_of((s, p, o)))
        if plan.algorithm == "enumerate":
            return self.tries[Permutation.SPO].enumerate(s, o)
        if plan.algorithm == "inverted_object":
            return self.inverted_object(o)
        if plan.algorithm == "inverted_predicate":
            return self.inverted_predicate(p)
        return self._select(plan.permutation, (s, p, o))

    def _select(self, perm: Permutation, pattern):
        trie = self.tries[perm]
        first, second, third = perm.apply(pattern)
        if first is None:  # full scan: every component is a wildcard
            results = iter(trie)
        else:
            results = trie.select(first, second, third)
        if self.layout == IndexLayout.CC and perm == Permutation.POS:
            unmap = self.tries[Permutation.OSP].unmap
            return (perm.restore((f, s_, unmap(s_, t))) for f, s_, t in results)
        if perm == Permutation.SPO:
            return results
        return map(perm.restore, results)

    def inverted_object(self, o: int):
        """??O on the predicate-based 2T layout: probe every predicate's
        object children, then emit the subjects under each hit."""
        if self.layout != IndexLayout.TWO_T_P:
            raise ValueError("inverted_object requires the 2tp layout")
        pos = self.tries[Permutation.POS]
        for p in range(self.counts.predicates):
            b, e = pos.l0_pair(p)
            f = pos.l1_find(b, e, o)
            if f is None:
                continue
            j, k = pos.l1_pair(f)
            for s in pos.l2_window(j, k).tolist():
                yield (s, p, o)

    def inverted_predicate(self, p: int):
        """?P? on the object-based 2T layout: walk the PS subject list and
        pattern match (s, p, ?) on SPO."""
        if self.layout != IndexLayout.TWO_T_O:
            raise ValueError("inverted_predicate requires the 2to layout")
        if not 0 <= p < self.counts.predicates:
            return
        spo = self.tries[Permutation.SPO]
        for s in self.ps.subjects_for(p).tolist():
            yield from spo.select(s, p)

    def to_array(self) -> np.ndarray:
        """All triples in canonical sorted order."""
        return self.tries[Permutation.SPO].to_array()

    def __len__(self) -> int:
        return self.counts.triples

    # -- stats ----------------------------------------------------------------------

    @property
    def size_bits(self) -> int:
        total = CONTAINER_HEADER_BITS + CRC_BITS
        total += sum(t.size_bits for t in self.tries.values())
        if self.ps is not None:
            total += self.ps.size_bits
        return total

    def _pair_counts(self):
        sp = len(self.tries[Permutation.SPO].l1_nodes)
        if Permutation.POS in self.tries:
            po = len(self.tries[Permutation.POS].l1_nodes)
        else:
            po = len(self.tries[Permutation.OPS].l1_nodes)
        if Permutation.OSP in self.tries:
            os_ = len(self.tries[Permutation.OSP].l1_nodes)
        else:
            arr = self.to_array()
            os_ = len(np.unique(arr[:, 0] * self.counts.objects + arr[:, 2]))
        return sp, po, os_

    def stats(self) -> IndexStats:
        n = self.counts.triples
        total = self.size_bits
        sequences = []
        fanout = []
        for perm, trie in self.tries.items():
            named = [
                ("L0 pointers", trie.l0_pointers),
                ("L1 nodes", trie.l1_nodes),
                ("L1 pointers", trie.l1_pointers),
                ("L2 nodes", trie.l2_nodes),
            ]
            for label, seq in named:
                sequences.append(SequenceStats(
                    perm.name, label, seq.codec.name, seq.size_bits,
                    seq.size_bits / n, 100.0 * seq.size_bits / total,
                ))
            fanout.append(FanoutStats(perm.name, 1, *_stats_pair(trie, 1)))
            fanout.append(FanoutStats(perm.name, 2, *_stats_pair(trie, 2)))
        if self.ps is not None:
            for label, seq in (("pointers", self.ps.pointers), ("subjects", self.ps.subjects)):
                sequences.append(SequenceStats(
                    "PS", label, seq.codec.name, seq.size_bits,
                    seq.size_bits / n, 100.0 * seq.size_bits / total,
                ))
        sp, po, os_ = self._pair_counts()
        return IndexStats(
            LAYOUT_NAMES[self.layout], n,
            self.counts.subjects, self.counts.predicates, self.counts.objects,
            sp, po, os_, total, total / n, sequences, fanout,
        )

    # -- serialization -----------------------------------------------------------------

    def to_bytes(self) -> bytes:
        parts = [MAGIC, bytes([int(self.layout)])]
        parts.append(_COUNTS.pack(
            self.counts.triples, self.counts.subjects,
            self.counts.predicates, self.counts.objects, 0,
        ))
        for perm in LAYOUT_TRIES[self.layout]:
            parts.append(self.tries[perm].to_bytes())
        if self.ps is not None:
            parts.append(self.ps.to_bytes())
        body = b"".join(parts)
        return body + crc64(body).to_bytes(8, "little")

    @classmethod
    def from_bytes(cls, buf: bytes,
                   scan_threshold: int = DEFAULT_SCAN_THRESHOLD) -> "RdfIndex":
        min_len = len(MAGIC) + 1 + _COUNTS.size + 8
        if len(buf) < min_len:
            raise CorruptContainer("container shorter than its fixed header")
        if buf[:8] != MAGIC:
            if buf[: len(_MAGIC_FAMILY)] == _MAGIC_FAMILY:
                raise VersionMismatch(f"unsupported container version {buf[:8]!r}")
            raise CorruptContainer("bad magic bytes")
        body, trailer = buf[:-8], buf[-8:]
        if crc64(body) != int.from_bytes(trailer, "little"):
            raise CorruptContainer("checksum mismatch")
        try:
            layout = IndexLayout(buf[8])
        except ValueError:
            raise CorruptContainer(f"unknown layout tag {buf[8]}") from None
        triples, subjects, predicates, objects, _ = _COUNTS.unpack_from(buf, 9)
        pos = 9 + _COUNTS.size
        try:
            tries = {}
            for perm in LAYOUT_TRIES[layout]:
                trie, pos = PermutedTrie.from_bytes(buf, pos, scan_threshold=scan_threshold)
                if trie.permutation != perm:
                    raise CorruptContainer(
                        f"expected {perm.name} trie, found {trie.permutation.name}"
                    )
                tries[perm] = trie
            ps = None
            if layout == IndexLayout.TWO_T_O:
                ps, pos = PSStructure.from_bytes(buf, pos)
        except (IndexError, ValueError, struct.error) as exc:
            raise CorruptContainer(f"malformed container: {exc}") from exc
        if pos != len(body):
            raise CorruptContainer("trailing bytes after the last record")
        return cls(layout, tries, Counts(triples, subjects, predicates, objects), ps)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path, scan_threshold: int = DEFAULT_SCAN_THRESHOLD) -> "RdfIndex":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), scan_threshold=scan_threshold)


def _stats_pair(trie: PermutedTrie, level: int):
    st = trie.level_stats(level)
    return st.avg_children, st.max_children


def build_index(triples, layout) -> RdfIndex:
    return RdfIndex.build(triples, layout)
