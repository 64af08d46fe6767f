"""Exception types raised by the index engine."""


class PtrindexError(Exception):
    """Base class for all engine errors."""


class NonMonotoneInput(PtrindexError):
    """A codec requiring non-decreasing input received a decreasing sequence."""


class UniverseOverflow(PtrindexError):
    """A value does not fit below the declared universe."""


class OutOfBounds(PtrindexError, IndexError):
    """A position is outside the valid range of a sequence or level."""


class RangeNotSorted(PtrindexError):
    """Values inside a sibling range are not strictly increasing."""


class UnsortedInput(PtrindexError):
    """Trie builder input is not lexicographically sorted."""


class NonDenseFirstLevel(PtrindexError):
    """First components of trie input do not cover 0..n-1 exactly."""


class DuplicateTriple(PtrindexError):
    """Trie builder input contains the same triple twice."""


class ChildNotFound(PtrindexError):
    """map() was asked for a child that is not under the given parent."""


class IdOutOfRange(PtrindexError):
    """A component ID is outside 0..count-1 for its component."""


class EmptyInput(PtrindexError):
    """An index cannot be built from zero triples."""


class CorruptContainer(PtrindexError):
    """Container bytes are malformed (bad magic, truncation, checksum)."""


class VersionMismatch(PtrindexError):
    """Container was written by an incompatible format version."""


class MalformedLine(PtrindexError):
    """An input line does not match the expected triple grammar."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no
