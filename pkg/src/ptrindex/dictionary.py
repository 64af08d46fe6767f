"""Term dictionary: URI/literal strings to dense per-component integer IDs.

Subjects, predicates, and objects get independent ID spaces (a term used as
both subject and object holds two IDs); within a component, the ID of a term
is its rank in the sorted table, so IDs densely cover 0..count-1 exactly as
the trie first levels require.

Lookup is binary search over a plain sorted table; nothing here is
compressed.
"""

from __future__ import annotations

from bisect import bisect_left

from .errors import CorruptContainer, OutOfBounds
from .index import crc64

DICT_MAGIC = b"PTRDICT1"

COMPONENTS = ("subject", "predicate", "object")

_COMPONENT_ALIASES = {
    "s": 0, "subject": 0, 0: 0,
    "p": 1, "predicate": 1, 1: 1,
    "o": 2, "object": 2, 2: 2,
}


def component_index(component) -> int:
    try:
        key = component.lower() if isinstance(component, str) else component
        return _COMPONENT_ALIASES[key]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown component {component!r}") from None


class TermTable:
    """One component's sorted term list; ID = rank."""

    def __init__(self, sorted_terms: list[str]):
        self._terms = sorted_terms

    @classmethod
    def build(cls, terms) -> "TermTable":
        return cls(sorted(set(terms)))

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def id(self, term: str):
        """Dense ID of a term, or None when absent."""
        i = bisect_left(self._terms, term)
        if i < len(self._terms) and self._terms[i] == term:
            return i
        return None

    def term(self, i: int) -> str:
        if not 0 <= i < len(self._terms):
            raise OutOfBounds(f"ID {i} not in [0, {len(self._terms)})")
        return self._terms[i]


class Dictionary:
    def __init__(self, subjects: TermTable, predicates: TermTable, objects: TermTable):
        self.tables = (subjects, predicates, objects)

    @classmethod
    def build(cls, subjects, predicates, objects) -> "Dictionary":
        return cls(TermTable.build(subjects), TermTable.build(predicates), TermTable.build(objects))

    @property
    def subjects(self) -> TermTable:
        return self.tables[0]

    @property
    def predicates(self) -> TermTable:
        return self.tables[1]

    @property
    def objects(self) -> TermTable:
        return self.tables[2]

    def encode_term(self, component, term: str):
        return self.tables[component_index(component)].id(term)

    def decode_id(self, component, i: int) -> str:
        return self.tables[component_index(component)].term(i)

    def encode_triple(self, terms):
        """ID triple for three term strings, or None if any term is unknown."""
        ids = tuple(self.tables[c].id(terms[c]) for c in range(3))
        return None if any(i is None for i in ids) else ids

    def decode_triple(self, ids):
        return tuple(self.tables[c].term(ids[c]) for c in range(3))

    # -- sidecar file --------------------------------------------------------

    def to_bytes(self) -> bytes:
        parts = [DICT_MAGIC]
        for table in self.tables:
            parts.append(len(table).to_bytes(8, "little"))
            for term in table:
                raw = term.encode("utf-8")
                parts.append(len(raw).to_bytes(4, "little"))
                parts.append(raw)
        body = b"".join(parts)
        return body + crc64(body).to_bytes(8, "little")

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Dictionary":
        if len(buf) < len(DICT_MAGIC) + 8 or buf[:8] != DICT_MAGIC:
            raise CorruptContainer("not a dictionary sidecar")
        body, trailer = buf[:-8], buf[-8:]
        if crc64(body) != int.from_bytes(trailer, "little"):
            raise CorruptContainer("dictionary checksum mismatch")
        pos = len(DICT_MAGIC)
        tables = []
        try:
            for _ in range(3):
                count = int.from_bytes(body[pos:pos + 8], "little")
                pos += 8
                terms = []
                for _ in range(count):
                    ln = int.from_bytes(body[pos:pos + 4], "little")
                    pos += 4
                    terms.append(body[pos:pos + ln].decode("utf-8"))
                    pos += ln
                tables.append(TermTable(terms))
        except (UnicodeDecodeError, IndexError) as exc:
            raise CorruptContainer(f"malformed dictionary: {exc}") from exc
        if pos != len(body):
            raise CorruptContainer("trailing bytes in dictionary sidecar")
        return cls(*tables)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Dictionary":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
