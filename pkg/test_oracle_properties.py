"""
Brute-force oracle tests and the randomized agreement suites between the
transformed-graph bounds and direct path enumeration.
"""

import random
from fractions import Fraction

import pytest

from src.errors import ExplosionGuard, OracleError, SourceEqualsSink
from src.flow import min_cut_bounds
from src.graph_core import EPSILON, build_graph
from src.oracle import (
    CompliantPathSet,
    NfaSimulator,
    enumerate_compliant_paths,
    max_disjoint_packing,
    oracle_bisection,
    oracle_diversity,
    repeat_limits,
    run_oracle,
)
from src.policy_lang import VALLEY_FREE_ALPHABET, PolicyNfa, compile_policy
from src.transform import MAPPED, EPSILON_EDGE, prepare_policy, prune_unreachable, tensor_transform

PATH_LIMIT = 60
FRONTIER_LIMIT = 50_000


def triangle_edges(peering_capacity=1):
    return [
        ("A", "B", "c2p", 1),
        ("B", "A", "p2c", 1),
        ("B", "C", "p2c", 1),
        ("C", "B", "c2p", 1),
        ("A", "C", "p2p", peering_capacity),
        ("C", "A", "p2p", 1),
    ]


# Random instances

def random_alphabet(rng):
    return rng.choice([("a",), ("a", "b"), ("a", "b", "c")])


def random_graph(rng, alphabet, dag=False):
    n = rng.randint(3, 7 if dag else 6)
    nodes = [f"v{i}" for i in range(n)]
    edges = []
    for _ in range(rng.randint(3, 12 if dag else 10)):
        i, j = rng.sample(range(n), 2)
        if dag:
            i, j = min(i, j), max(i, j)
        edges.append((nodes[i], nodes[j], rng.choice(alphabet), 1))
    return build_graph(alphabet, edges, nodes=nodes)


def random_nfa(rng, alphabet, cartesian, epsilon=False):
    k = rng.randint(2, 5)
    states = tuple(f"q{i}" for i in range(k))
    transitions = []
    for symbol in alphabet:
        if cartesian:
            if rng.random() < 0.2:
                continue
            sources = rng.sample(states, rng.randint(1, k))
            targets = rng.sample(states, rng.randint(1, k))
            transitions.extend((a, symbol, b) for a in sources for b in targets)
        else:
            for _ in range(rng.randint(1, 4)):
                transitions.append((rng.choice(states), symbol, rng.choice(states)))
    if epsilon:
        for _ in range(rng.randint(0, 2)):
            transitions.append((rng.choice(states), EPSILON, rng.choice(states)))
    accepting = frozenset(rng.sample(states, rng.randint(1, 2)))
    return PolicyNfa(states, frozenset(alphabet), tuple(transitions), "q0", accepting, description="random")


def random_query(rng, g, dag=False):
    i, j = rng.sample(range(len(g.nodes)), 2)
    if dag:
        i, j = min(i, j), max(i, j)
    return g.nodes[i], g.nodes[j]


def reused_edge_instance():
    """
    b-relation {(q0,q1), (q1,q0)} needs two blocks; the only compliant walk
    v3 -b-> v0 -a-> v3 -b-> v0 crosses the b edge twice.
    """
    g = build_graph({"a", "b"}, [("v3", "v0", "b", 1), ("v0", "v3", "a", 1)], nodes=["v0", "v1", "v2", "v3"])
    nfa = PolicyNfa(
        ("q0", "q1"),
        frozenset({"a", "b"}),
        (("q0", "b", "q1"), ("q1", "a", "q1"), ("q1", "b", "q0")),
        "q0",
        frozenset({"q0"}),
        description="reused edge",
    )
    return g, nfa


def bounded_paths(g, nfa, source, sink):
    pset = enumerate_compliant_paths(g, nfa, source, sink, frontier_limit=FRONTIER_LIMIT)
    if len(pset) > PATH_LIMIT:
        raise ExplosionGuard("too many paths for the packing oracle", paths=len(pset))
    return pset


def graph_words(g, nfa, source, sink, max_len):
    """Label strings of source→sink walks of length 1..max_len accepted by nfa."""
    words = set()
    frontier = {(source, ()): nfa.epsilon_closure([nfa.start])}
    for _ in range(max_len):
        step = {}
        for (node, word), states in frontier.items():
            for e in g.out_edges(node):
                reached = nfa.step(states, e.label)
                if reached:
                    key = (e.dst, word + (e.label,))
                    step[key] = step.get(key, frozenset()) | reached
        frontier = step
        words |= {word for (node, word), states in frontier.items() if node == sink and states & nfa.accepting}
    return words


def product_words(tg, max_len):
    """Label strings of source→sink walks in the transformed graph; epsilon edges add nothing."""
    def close(nodes):
        seen = set(nodes)
        stack = list(seen)
        while stack:
            for i in tg.out_edges(stack.pop()):
                e = tg.edges[i]
                if e.kind == EPSILON_EDGE and e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return frozenset(seen)

    words = set()
    frontier = {(): close([tg.source])}
    for _ in range(max_len):
        step = {}
        for word, nodes in frontier.items():
            for node in nodes:
                for i in tg.out_edges(node):
                    e = tg.edges[i]
                    if e.kind == MAPPED:
                        step.setdefault(word + (e.symbol,), set()).add(e.dst)
        frontier = {word: close(nodes) for word, nodes in step.items()}
        words |= {word for word, nodes in frontier.items() if tg.sink in nodes}
    return words


# Fixed instances

class TestEnumeration:
    def test_vf_triangle_paths(self, vf_triangle, valley_free):
        pset = enumerate_compliant_paths(vf_triangle, valley_free, "A", "C", max_len=3)
        assert pset.paths == ((0, 2), (4,))

    def test_policy_accepting_nothing(self, vf_triangle):
        nothing = PolicyNfa(("q0",), VALLEY_FREE_ALPHABET, (), "q0", frozenset())
        assert len(enumerate_compliant_paths(vf_triangle, nothing, "A", "C")) == 0

    def test_single_edge(self):
        g = build_graph({"a"}, [("v1", "v2", "a", 1)])
        pset = enumerate_compliant_paths(g, compile_policy("a", {"a"}), "v1", "v2")
        assert pset.paths == ((0,),)

    def test_same_endpoints_rejected(self, vf_triangle, valley_free):
        with pytest.raises(SourceEqualsSink):
            enumerate_compliant_paths(vf_triangle, valley_free, "A", "A")

    def test_frontier_guard(self, vf_triangle, valley_free):
        with pytest.raises(ExplosionGuard):
            enumerate_compliant_paths(vf_triangle, valley_free, "A", "C", frontier_limit=1)

    def test_node_simple_reading_differs_on_loops(self):
        g = build_graph({"a", "w"}, [("s", "x", "a", 1), ("x", "x", "w", 1), ("x", "t", "a", 1)])
        nfa = compile_policy("a* w a*", {"a", "w"})
        assert enumerate_compliant_paths(g, nfa, "s", "t").paths == ((0, 1, 2),)
        assert len(enumerate_compliant_paths(g, nfa, "s", "t", node_simple=True)) == 0
        report = run_oracle(g, nfa, "s", "t")
        assert (report.diversity, report.node_simple_diversity) == (1, 0)
        assert not report.readings_agree

    def test_label_reuse_cap(self):
        g, nfa = reused_edge_instance()
        assert len(enumerate_compliant_paths(g, nfa, "v3", "v0")) == 0
        assert repeat_limits(nfa) == {"a": 1, "b": 2}
        pset = enumerate_compliant_paths(g, nfa, "v3", "v0", max_uses=repeat_limits(nfa))
        assert pset.paths == ((0, 1, 0),)
        assert pset.max_len == 3


class TestPacking:
    def test_vf_triangle(self, vf_triangle, valley_free):
        assert oracle_diversity(vf_triangle, valley_free, "A", "C") == 2

    def test_empty_set(self):
        assert max_disjoint_packing(CompliantPathSet((), 3)) == 0

    def test_shared_edge_forces_one(self):
        assert max_disjoint_packing(CompliantPathSet(((0, 1), (0, 2)), 2)) == 1

    def test_adding_paths_never_lowers_packing(self):
        base = CompliantPathSet(((0, 1), (0, 2), (3,)), 2)
        more = CompliantPathSet(base.paths + ((4, 5),), 2)
        assert max_disjoint_packing(more) >= max_disjoint_packing(base) == 2

    def test_path_limit(self):
        with pytest.raises(ExplosionGuard):
            max_disjoint_packing(CompliantPathSet(((0,), (1,)), 1), path_limit=1)

    def test_relabeling_keeps_values(self, valley_free):
        names = {"A": "x9", "B": "x1", "C": "x5"}
        g = build_graph(VALLEY_FREE_ALPHABET, triangle_edges())
        renamed = build_graph(
            VALLEY_FREE_ALPHABET, [(names[s], names[d], label, c) for s, d, label, c in triangle_edges()]
        )
        assert oracle_diversity(g, valley_free, "A", "C") == oracle_diversity(renamed, valley_free, "x9", "x5")


class TestBisection:
    def test_wide_peering_link(self, valley_free):
        g = build_graph(VALLEY_FREE_ALPHABET, triangle_edges(peering_capacity=3))
        assert oracle_bisection(g, valley_free, "A", "C") == 4

    def test_no_compliant_path(self, valley_free):
        g = build_graph(VALLEY_FREE_ALPHABET, [("A", "B", "p2c", 1), ("B", "C", "c2p", 1)])
        assert oracle_bisection(g, valley_free, "A", "C") == 0

    def test_fractional_packing_of_given_paths(self):
        # Three paths pairwise sharing one unit edge: 3/2 fractionally, 1 integrally
        g = build_graph({"a"}, [("s", "x", "a", 1), ("x", "y", "a", 1), ("y", "t", "a", 1)])
        pset = CompliantPathSet(((0, 1), (1, 2), (0, 2)), 2)
        assert oracle_bisection(g, compile_policy("a a", {"a"}), "s", "t", pset=pset) == Fraction(3, 2)
        assert max_disjoint_packing(pset) == 1

    def test_unbounded_capacity(self, valley_free):
        g = build_graph(VALLEY_FREE_ALPHABET, [("A", "C", "p2p", "inf")])
        with pytest.raises(OracleError):
            oracle_bisection(g, valley_free, "A", "C")

    def test_run_oracle_record(self, vf_triangle, valley_free):
        report = run_oracle(vf_triangle, valley_free, "A", "C")
        assert (report.diversity, report.node_simple_diversity, report.bisection) == (2, 2, 2)
        record = report.to_dict(vf_triangle)
        assert record["paths"] == [["A-c2p->B", "B-p2c->C"], ["A-p2p->C"]]
        assert record["readings_agree"] is True
        assert record["reuse_bisection"] == 2

    def test_lower_bound_can_exceed_edge_simple_oracle(self):
        g, nfa = reused_edge_instance()
        report = min_cut_bounds(g, nfa, "v3", "v0")
        assert not report.exact
        assert (report.lower, report.upper) == (Fraction(1, 2), 1)

        record = run_oracle(g, nfa, "v3", "v0")
        assert (record.diversity, record.bisection) == (0, 0)
        assert record.reuse_bisection == Fraction(1, 2)
        assert report.lower <= record.reuse_bisection <= report.upper


# Randomized suites

@pytest.mark.slow
def test_exact_policies_match_oracle():
    rng = random.Random(20240601)
    checked = attempts = 0
    while checked < 300:
        attempts += 1
        assert attempts < 20_000, "could not build enough exact instances"
        alphabet = random_alphabet(rng)
        nfa = random_nfa(rng, alphabet, cartesian=True)
        if not prepare_policy(nfa).exact:
            continue
        g = random_graph(rng, alphabet)
        source, sink = random_query(rng, g)
        try:
            pset = bounded_paths(g, nfa, source, sink)
            diversity = max_disjoint_packing(pset, path_limit=PATH_LIMIT)
        except ExplosionGuard:
            continue

        report = min_cut_bounds(g, nfa, source, sink)
        assert report.exact
        assert report.lower == report.upper == diversity, (g, nfa.transitions, source, sink)
        simulator = NfaSimulator(nfa)
        for path in pset.paths:
            assert simulator.accepts([g.edge(i).label for i in path])
        for path in report.paths:
            assert nfa.accepts(path.labels)
        checked += 1


@pytest.mark.slow
def test_bounds_sandwich_the_oracle_on_dags():
    rng = random.Random(1312)
    checked = attempts = 0
    while checked < 300:
        attempts += 1
        assert attempts < 20_000, "could not build enough inexact instances"
        alphabet = random_alphabet(rng)
        nfa = random_nfa(rng, alphabet, cartesian=False)
        if prepare_policy(nfa).exact:
            continue
        g = random_graph(rng, alphabet, dag=True)
        source, sink = random_query(rng, g, dag=True)
        try:
            pset = bounded_paths(g, nfa, source, sink)
            diversity = max_disjoint_packing(pset, path_limit=PATH_LIMIT)
            bisection = oracle_bisection(g, nfa, source, sink, pset=pset, path_limit=PATH_LIMIT)
        except ExplosionGuard:
            continue

        report = min_cut_bounds(g, nfa, source, sink)
        assert not report.exact
        assert report.lower <= bisection <= report.upper, (g, nfa.transitions, source, sink)
        assert diversity <= bisection
        assert isinstance(report.lower, Fraction)
        for path in report.paths:
            assert nfa.accepts(path.labels)
        checked += 1


@pytest.mark.slow
def test_bounds_sandwich_the_reuse_walk_lp():
    # Cyclic graphs allowed; the bracketed value packs walks reusing an s-edge up to n_s times
    rng = random.Random(4242)
    checked = attempts = 0
    while checked < 200:
        attempts += 1
        assert attempts < 20_000, "could not build enough inexact instances"
        alphabet = random_alphabet(rng)
        nfa = random_nfa(rng, alphabet, cartesian=False)
        if prepare_policy(nfa).exact:
            continue
        g = random_graph(rng, alphabet)
        source, sink = random_query(rng, g)
        try:
            pset = bounded_paths(g, nfa, source, sink)
            walks = enumerate_compliant_paths(
                g, nfa, source, sink, frontier_limit=FRONTIER_LIMIT, max_uses=repeat_limits(nfa)
            )
            diversity = max_disjoint_packing(pset, path_limit=PATH_LIMIT)
            bisection = oracle_bisection(g, nfa, source, sink, pset=pset, path_limit=PATH_LIMIT)
            walk_bisection = oracle_bisection(g, nfa, source, sink, pset=walks, path_limit=PATH_LIMIT)
        except ExplosionGuard:
            continue

        report = min_cut_bounds(g, nfa, source, sink)
        assert report.lower <= walk_bisection <= report.upper, (g, nfa.transitions, source, sink)
        assert diversity <= bisection <= walk_bisection
        simulator = NfaSimulator(nfa)
        for walk in walks.paths:
            assert simulator.accepts([g.edge(i).label for i in walk])
        checked += 1


@pytest.mark.slow
def test_transformed_paths_spell_exactly_the_compliant_words():
    rng = random.Random(77)
    for _ in range(100):
        alphabet = random_alphabet(rng)
        nfa = random_nfa(rng, alphabet, cartesian=rng.random() < 0.5, epsilon=True)
        g = random_graph(rng, alphabet)
        source, sink = random_query(rng, g)
        tg = tensor_transform(g, prepare_policy(nfa), source, sink)
        expected = graph_words(g, nfa, source, sink, 8)
        assert product_words(tg, 8) == expected
        assert product_words(prune_unreachable(tg), 8) == expected
