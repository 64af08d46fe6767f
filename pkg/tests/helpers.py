"""Shared fixtures-in-spirit: the worked example set, independent oracles,
and random triple-set generators used across the suite."""

import numpy as np

from ptrindex.trie import Permutation

# the 11-triple worked example indexed throughout the docs and tests
FIG1_TRIPLES = [
    (0, 0, 2), (0, 0, 3), (0, 1, 0), (1, 0, 4), (1, 2, 0), (1, 2, 1),
    (2, 0, 2), (2, 1, 0), (3, 2, 1), (3, 2, 2), (4, 2, 4),
]

ALL_SHAPES = ["SPO", "SP?", "S??", "S?O", "?PO", "?P?", "??O", "???"]


def brute_filter(triples, pattern):
    """Independent oracle: plain filtering, canonical sorted order."""
    s, p, o = pattern
    return sorted(
        t for t in triples
        if (s is None or t[0] == s) and (p is None or t[1] == p) and (o is None or t[2] == o)
    )


def permute_sort(triples, permutation: Permutation) -> np.ndarray:
    """Independent oracle for trie-builder input: permute columns, sort."""
    arr = np.asarray(sorted(set(map(tuple, triples))), dtype=np.int64)
    parr = arr[:, list(permutation.columns)]
    order = np.lexsort((parr[:, 2], parr[:, 1], parr[:, 0]))
    return parr[order]


def children_by_parent(triples, permutation: Permutation):
    """parent value -> sorted distinct second-level child values."""
    groups = {}
    for t in triples:
        f, s, _ = permutation.apply(t)
        groups.setdefault(f, set()).add(s)
    return {k: sorted(v) for k, v in groups.items()}


def densify(arr: np.ndarray) -> np.ndarray:
    """Remap every component column to dense 0..count-1 IDs (rank order),
    mirroring what dictionary encoding produces."""
    out = np.empty_like(arr)
    for c in range(3):
        _, out[:, c] = np.unique(arr[:, c], return_inverse=True)
    return out


def zipf_probs(k: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, k + 1) ** exponent
    return w / w.sum()


def random_triples(rng, n, n_s, n_p, n_o, skew: float | None = None) -> np.ndarray:
    """Random dense triple set; `skew` applies a Zipf profile to predicates
    and objects (mimicking real RDF shape), None draws uniformly."""
    if skew is None:
        s = rng.integers(0, n_s, size=n)
        p = rng.integers(0, n_p, size=n)
        o = rng.integers(0, n_o, size=n)
    else:
        s = rng.integers(0, n_s, size=n)
        p = rng.choice(n_p, size=n, p=zipf_probs(n_p, skew))
        o = rng.choice(n_o, size=n, p=zipf_probs(n_o, skew))
    arr = np.unique(np.stack([s, p, o], axis=1).astype(np.int64), axis=0)
    return densify(arr)


def pattern_of(triple, shape):
    return tuple(triple[i] if shape[i] != "?" else None for i in range(3))
