"""Layouts, dispatch, query/oracle equivalence, cross compression, PS,
and container serialization."""

import threading

import numpy as np
import pytest

from helpers import ALL_SHAPES, FIG1_TRIPLES, brute_filter, pattern_of, random_triples
from ptrindex.errors import CorruptContainer, EmptyInput, IdOutOfRange, VersionMismatch
from ptrindex.index import (
    LAYOUT_TRIES,
    IndexLayout,
    PSStructure,
    QueryPlan,
    RdfIndex,
    build_index,
    dispatch,
    shape_of,
)
from ptrindex.trie import WILDCARD, Permutation

ALL_LAYOUTS = list(IndexLayout)

# oracle-recomputed from the map definition (see tests below re-deriving it)
FIG1_CC_MAPPED_LEAVES = [0, 1, 0, 0, 0, 2, 1, 0, 1, 2, 1]


@pytest.fixture(scope="module")
def fig1_indexes():
    return {layout: build_index(FIG1_TRIPLES, layout) for layout in ALL_LAYOUTS}


# -- layout construction ---------------------------------------------------------


def test_cc_mapped_pos_leaves(fig1_indexes):
    idx = fig1_indexes[IndexLayout.CC]
    stored = idx.tries[Permutation.POS].node_array(2).tolist()
    assert stored == FIG1_CC_MAPPED_LEAVES
    # re-derive through the mapping oracle: position of each POS leaf subject
    # among its object's OSP children
    osp = idx.tries[Permutation.OSP]
    expected = []
    for s, p, o in sorted(FIG1_TRIPLES, key=lambda t: (t[1], t[2], t[0])):
        expected.append(osp.map(o, s))
    assert stored == expected


def test_cc_leaves_below_parent_fanout(fig1_indexes):
    idx = fig1_indexes[IndexLayout.CC]
    pos = idx.tries[Permutation.POS]
    osp = idx.tries[Permutation.OSP]
    objects = pos.node_array(1)
    leaves = pos.node_array(2)
    ptr1 = pos.pointer_array(1)
    osp_ptr0 = osp.pointer_array(0)
    fanout = np.diff(osp_ptr0)
    per_leaf_obj = np.repeat(objects, np.diff(ptr1))
    assert np.all(leaves < fanout[per_leaf_obj])


def test_two_tp_has_exactly_two_tries(fig1_indexes):
    idx = fig1_indexes[IndexLayout.TWO_T_P]
    assert set(idx.tries) == {Permutation.SPO, Permutation.POS}
    assert idx.ps is None


def test_two_to_ps_lists(fig1_indexes):
    idx = fig1_indexes[IndexLayout.TWO_T_O]
    assert set(idx.tries) == {Permutation.SPO, Permutation.OPS}
    assert idx.ps.subjects_for(0).tolist() == [0, 1, 2]
    assert idx.ps.subjects_for(1).tolist() == [0, 2]
    assert idx.ps.subjects_for(2).tolist() == [1, 3, 4]
    assert len(idx.ps) == 8  # distinct SP pairs


def test_build_dedups_and_counts():
    idx = build_index(FIG1_TRIPLES + [FIG1_TRIPLES[0]] * 3, IndexLayout.THREE_T)
    assert idx.counts.triples == 11
    assert (idx.counts.subjects, idx.counts.predicates, idx.counts.objects) == (5, 3, 5)


def test_build_rejects_empty():
    with pytest.raises(EmptyInput):
        build_index([], IndexLayout.THREE_T)


def test_build_rejects_non_dense_or_negative():
    with pytest.raises(IdOutOfRange):
        build_index([(0, 0, 0), (2, 0, 0)], IndexLayout.THREE_T)
    with pytest.raises(IdOutOfRange):
        build_index([(0, 0, -1)], IndexLayout.THREE_T)


# -- dispatch ----------------------------------------------------------------------


def test_dispatch_spec_examples():
    assert dispatch(IndexLayout.THREE_T, "S?O") == QueryPlan("select", Permutation.OSP)
    assert dispatch(IndexLayout.TWO_T_P, "S?O") == QueryPlan("enumerate", Permutation.SPO)
    assert dispatch(IndexLayout.TWO_T_O, "?P?") == QueryPlan(
        "inverted_predicate", Permutation.SPO
    )


def test_dispatch_totality():
    for layout in ALL_LAYOUTS:
        for shape in ALL_SHAPES:
            plan = dispatch(layout, shape)
            assert plan.permutation in LAYOUT_TRIES[layout]
    with pytest.raises(ValueError):
        dispatch(IndexLayout.THREE_T, "XYZ")


def test_shape_of():
    assert shape_of((1, None, 2)) == "S?O"
    assert shape_of((None, None, None)) == "???"
    assert shape_of((1, WILDCARD, 2)) == "S?O"


# -- queries -------------------------------------------------------------------------


@pytest.mark.parametrize("layout", ALL_LAYOUTS)
def test_fig1_query_examples(layout, fig1_indexes):
    idx = fig1_indexes[layout]
    assert sorted(idx.query((None, 1, 0))) == [(0, 1, 0), (2, 1, 0)]
    assert sorted(idx.query((None, None, None))) == sorted(FIG1_TRIPLES)
    assert sorted(idx.query((1, None, 0))) == [(1, 2, 0)]


@pytest.mark.parametrize("layout", ALL_LAYOUTS)
def test_query_out_of_range_id(layout, fig1_indexes):
    with pytest.raises(IdOutOfRange):
        idx = fig1_indexes[layout]
        list(idx.query((9, None, None)))


def test_inverted_object_examples(fig1_indexes):
    idx = fig1_indexes[IndexLayout.TWO_T_P]
    assert sorted(idx.inverted_object(0)) == [(0, 1, 0), (1, 2, 0), (2, 1, 0)]
    assert list(idx.inverted_object(5)) == []
    assert sorted(idx.inverted_object(4)) == [(1, 0, 4), (4, 2, 4)]


def test_inverted_predicate_examples(fig1_indexes):
    idx = fig1_indexes[IndexLayout.TWO_T_O]
    assert sorted(idx.inverted_predicate(2)) == [
        (1, 2, 0), (1, 2, 1), (3, 2, 1), (3, 2, 2), (4, 2, 4)
    ]
    assert sorted(idx.inverted_predicate(1)) == [(0, 1, 0), (2, 1, 0)]
    assert list(idx.inverted_predicate(7)) == []


def test_inverted_ops_require_matching_layout(fig1_indexes):
    with pytest.raises(ValueError):
        list(fig1_indexes[IndexLayout.THREE_T].inverted_object(0))
    with pytest.raises(ValueError):
        list(fig1_indexes[IndexLayout.TWO_T_P].inverted_predicate(0))


@pytest.mark.parametrize("layout", ALL_LAYOUTS)
@pytest.mark.parametrize("profile", ["uniform", "skewed"])
def test_query_matches_oracle_random(layout, profile):
    rng = np.random.default_rng(hash((layout, profile)) % 2**32)
    skew = 1.2 if profile == "skewed" else None
    arr = random_triples(rng, 700, 50, 7, 60, skew=skew)
    triples = list(map(tuple, arr.tolist()))
    idx = build_index(arr, layout)
    for shape in ALL_SHAPES:
        for t in triples[:: max(1, len(triples) // 6)]:
            pattern = pattern_of(t, shape)
            assert sorted(idx.query(pattern)) == brute_filter(triples, pattern), (
                layout, shape, pattern,
            )
        # a pattern over valid IDs that may match nothing
        miss = pattern_of((0, 0, 0), shape)
        assert sorted(idx.query(miss)) == brute_filter(triples, miss)


def test_query_accepts_wildcard_sentinel(fig1_indexes):
    idx = fig1_indexes[IndexLayout.THREE_T]
    assert sorted(idx.query((WILDCARD, 1, 0))) == [(0, 1, 0), (2, 1, 0)]


# -- stats ----------------------------------------------------------------------------


@pytest.mark.parametrize("layout", ALL_LAYOUTS)
def test_fig1_stats_counts(layout, fig1_indexes):
    st = fig1_indexes[layout].stats()
    assert st.triples == 11
    assert (st.subjects, st.predicates, st.objects) == (5, 3, 5)
    assert (st.sp_pairs, st.po_pairs, st.os_pairs) == (8, 8, 11)
    assert st.total_bits > 0
    # sequences plus fixed record/container headers account for everything
    pct = sum(s.pct_of_total for s in st.sequences)
    assert 0 < pct <= 100.0


def test_fig1_fanout_stats(fig1_indexes):
    st = fig1_indexes[IndexLayout.THREE_T].stats()
    spo_l1 = next(f for f in st.fanout if f.trie == "SPO" and f.level == 1)
    assert spo_l1.avg_children == pytest.approx(8 / 5)
    assert spo_l1.max_children == 2
    osp_l2 = next(f for f in st.fanout if f.trie == "OSP" and f.level == 2)
    assert osp_l2.avg_children == pytest.approx(1.0)
    assert osp_l2.max_children == 1


def test_two_t_smaller_than_three_t():
    rng = np.random.default_rng(77)
    arr = random_triples(rng, 4000, 300, 20, 400, skew=1.1)
    three = build_index(arr, IndexLayout.THREE_T)
    two = build_index(arr, IndexLayout.TWO_T_P)
    assert two.size_bits < three.size_bits


# -- serialization -----------------------------------------------------------------------


@pytest.mark.parametrize("layout", ALL_LAYOUTS)
def test_save_load_round_trip(layout, tmp_path):
    rng = np.random.default_rng(int(layout) + 100)
    arr = random_triples(rng, 500, 40, 6, 50)
    triples = list(map(tuple, arr.tolist()))
    idx = build_index(arr, layout)
    path = tmp_path / "x.idx"
    idx.save(path)
    back = RdfIndex.load(path)
    assert back.layout == layout
    assert back.counts == idx.counts
    for shape in ALL_SHAPES:
        pattern = pattern_of(triples[3], shape)
        assert sorted(back.query(pattern)) == sorted(idx.query(pattern))
    assert back.to_bytes() == idx.to_bytes()


def test_corrupt_containers_rejected(fig1_indexes, tmp_path):
    blob = fig1_indexes[IndexLayout.CC].to_bytes()
    with pytest.raises(CorruptContainer):
        RdfIndex.from_bytes(blob[: len(blob) // 2])
    with pytest.raises(CorruptContainer):
        RdfIndex.from_bytes(b"NOTMAGIC" + blob[8:])
    with pytest.raises(VersionMismatch):
        RdfIndex.from_bytes(b"PTRIDX99" + blob[8:])
    flipped = bytearray(blob)
    flipped[60] ^= 0x40
    with pytest.raises(CorruptContainer):
        RdfIndex.from_bytes(bytes(flipped))
    with pytest.raises(CorruptContainer):
        RdfIndex.from_bytes(blob[:10])


def test_ps_structure_round_trip():
    pairs = np.array([[0, 1], [0, 4], [1, 0], [2, 2], [2, 3]], dtype=np.int64)
    ps = PSStructure.build(pairs, 3)
    blob = ps.to_bytes()
    back, consumed = PSStructure.from_bytes(blob)
    assert consumed == len(blob)
    assert back.subjects_for(0).tolist() == [1, 4]
    assert back.subjects_for(1).tolist() == [0]
    assert back.subjects_for(2).tolist() == [2, 3]


# -- concurrency ---------------------------------------------------------------------------


def test_concurrent_readers(fig1_indexes):
    idx = fig1_indexes[IndexLayout.THREE_T]
    expected = sorted(FIG1_TRIPLES)
    failures = []

    def worker():
        for _ in range(50):
            if sorted(idx.query((None, None, None))) != expected:
                failures.append("mismatch")

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not failures
