"""
Tests for per-symbol transition relations and their Cartesian-product block partitions.
"""

import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.decomposition import (
    Block,
    Minimality,
    TransitionRelation,
    _greedy_blocks,
    decompose,
    decompose_all,
    exactness_report,
    is_cartesian,
    transitions_by_symbol,
)
from src.errors import UnknownSymbol
from src.graph_core import EPSILON
from src.policy_lang import compile_policy, load_nfa, parse_nfa_text, preset

STATES = ["q0", "q1", "q2", "q3"]

relations = st.sets(
    st.tuples(st.sampled_from(STATES), st.sampled_from(STATES)), max_size=16
).map(lambda pairs: TransitionRelation("a", tuple(sorted(pairs)), tuple(STATES)))


def rel(*pairs) -> TransitionRelation:
    return TransitionRelation("a", tuple(pairs))


def covered(decomposition) -> list:
    pairs = []
    for block in decomposition.blocks:
        pairs.extend(block.pairs())
    return pairs


class TestTransitionsBySymbol:
    def test_one_to_many(self):
        nfa = parse_nfa_text("start: q0\naccept: q1 q2\nq0 a q1\nq0 a q2\n")
        assert transitions_by_symbol(nfa, "a").pairs == (("q0", "q1"), ("q0", "q2"))

    def test_epsilon_relation(self):
        nfa = compile_policy("a b", {"a", "b"})
        assert transitions_by_symbol(nfa, EPSILON).pairs == (("q1", "q2"),)

    def test_unknown_symbol(self):
        with pytest.raises(UnknownSymbol):
            transitions_by_symbol(compile_policy("a", {"a"}), "z")

    def test_relation_order_follows_states(self):
        relation = TransitionRelation("a", (("q2", "q0"), ("q0", "q1"), ("q0", "q1")), ("q0", "q1", "q2"))
        assert relation.pairs == (("q0", "q1"), ("q2", "q0"))
        assert relation.domain() == ("q0", "q2")
        assert relation.range() == ("q0", "q1")


class TestIsCartesian:
    def test_one_to_many(self):
        assert is_cartesian(rel(("q0", "q1"), ("q0", "q2")))

    def test_chain_is_not_cartesian(self):
        assert not is_cartesian(rel(("q0", "q1"), ("q1", "q2")))

    def test_empty_relation(self):
        assert is_cartesian(rel())


class TestDecompose:
    def test_many_to_one(self):
        d = decompose(rel(("q0", "q2"), ("q1", "q2")))
        assert d.blocks == (Block(("q0", "q1"), ("q2",)),)
        assert d.n_s == 1 and d.exact

    def test_complete_many_to_many(self):
        d = decompose(rel(("q0", "q2"), ("q0", "q3"), ("q1", "q2"), ("q1", "q3")))
        assert d.blocks == (Block(("q0", "q1"), ("q2", "q3")),)
        assert d.blocks[0].kind == "many-to-many"

    def test_chain_needs_two_blocks(self):
        d = decompose(rel(("q0", "q1"), ("q1", "q2")))
        assert d.n_s == 2
        assert set(d.blocks) == {Block(("q0",), ("q1",)), Block(("q1",), ("q2",))}
        assert d.minimality is Minimality.GUARANTEED
        assert not d.exact

    def test_empty_relation_has_no_blocks(self):
        d = decompose(rel())
        assert d.n_s == 0
        assert d.exact

    def test_above_limit_uses_greedy_cover(self):
        d = decompose(rel(("q0", "q1"), ("q1", "q2"), ("q2", "q0")), exact_limit=2)
        assert d.minimality is Minimality.HEURISTIC
        assert sorted(covered(d)) == [("q0", "q1"), ("q1", "q2"), ("q2", "q0")]

    def test_exact_search_beats_row_greedy(self):
        # Taking q0's full row first leaves two singleton blocks
        relation = rel(("q0", "q1"), ("q0", "q2"), ("q1", "q1"), ("q2", "q2"))
        assert len(_greedy_blocks(relation)) == 3
        exact = decompose(relation)
        assert exact.n_s == 2
        assert set(exact.blocks) == {Block(("q0", "q1"), ("q1",)), Block(("q0", "q2"), ("q2",))}

    @pytest.mark.parametrize(
        "pairs, n_s",
        [
            # Wide star plus one extra pair: greedy is already minimal
            ([("q0", f"q{i}") for i in range(1, 16)] + [("q1", "q16")], 2),
            # Star plus a three-pair matching: no two of those pairs share a block
            ([("q0", f"q{i}") for i in range(1, 14)] + [("q1", "q14"), ("q2", "q15"), ("q3", "q16")], 4),
        ],
    )
    def test_exact_search_at_the_limit_is_fast(self, pairs, n_s):
        relation = rel(*pairs)
        assert len(relation.pairs) == 16
        started = time.perf_counter()
        d = decompose(relation, exact_limit=16)
        assert time.perf_counter() - started < 1.0
        assert d.n_s == n_s
        assert d.minimality is Minimality.GUARANTEED
        assert sorted(covered(d)) == sorted(relation.pairs)

    @given(relations)
    def test_blocks_partition_the_relation(self, relation):
        d = decompose(relation)
        pairs = covered(d)
        assert len(pairs) == len(set(pairs))
        assert set(pairs) == set(relation.pairs)

    @given(relations)
    def test_single_block_iff_cartesian(self, relation):
        if relation.pairs:
            assert (decompose(relation).n_s == 1) == is_cartesian(relation)

    @given(relations)
    def test_exact_never_worse_than_greedy(self, relation):
        assert decompose(relation).n_s <= len(_greedy_blocks(relation))


class TestExactnessReport:
    @pytest.mark.parametrize("name", ["valley-free", "multiple-peering-links", "any"])
    def test_presets_are_exact(self, name):
        report = exactness_report(preset(name)[1])
        assert report.exact
        assert set(report.n_s) == {"c2p", "p2c", "p2p"}
        assert all(n == 1 for n in report.n_s.values())

    def test_chain_is_bounds_only(self, data_dir):
        report = exactness_report(load_nfa(data_dir / "chain.nfa"))
        assert not report.exact
        assert report.n_s == {"a": 2}
        record = report.to_dict()
        assert record["exact"] is False
        assert record["symbols"][0]["minimal"] == "guaranteed"

    def test_decompose_all_is_sorted(self):
        nfa = compile_policy("c b a", {"a", "b", "c"})
        assert list(decompose_all(nfa)) == ["a", "b", "c"]
