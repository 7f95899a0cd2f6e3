"""
Tests for topology ingestion, address weights, customer cones and the experiment harness.
"""

import math

import pandas as pd
import pytest

from src.errors import ConflictingRelationship, InsufficientSupport, ParseError
from src.experiments import (
    ccdf,
    diversity_matrix,
    matrix_view,
    run_depeering_experiment,
    run_diversity_experiment,
    run_peering_class_experiment,
    summarize,
    synthetic_scale_free,
    synthetic_tier_one_topology,
)
from src.ingest import (
    AsRelationship,
    WeightTable,
    aggregate_pfx2as,
    augment_peering,
    customer_cone,
    depeer,
    exclusive_customer_cone,
    load_peering_members,
    load_weights,
    parse_as_rel,
    parse_as_rel_text,
    to_labeled_graph,
    weighted_sample_pairs,
    with_next_hop_labels,
)
from src.policy_lang import preset


@pytest.fixture
def sample_graph(data_dir):
    return to_labeled_graph(parse_as_rel(data_dir / "sample.as-rel"))


@pytest.fixture
def members(data_dir):
    return load_peering_members(data_dir / "peering_members.csv")


@pytest.fixture
def weights(data_dir):
    return load_weights(data_dir / "address_weights.csv")


class TestAsRelationships:
    def test_triangle_file(self, data_dir):
        rels = parse_as_rel(data_dir / "vf_triangle.as-rel")
        assert rels.records == (
            AsRelationship(2, 1, "p2c"),
            AsRelationship(2, 3, "p2c"),
            AsRelationship(1, 3, "p2p"),
        )
        assert rels.metadata["source"].startswith("triangle fixture")

        g = to_labeled_graph(rels)
        assert len(g.nodes) == 3
        assert {(e.src, e.dst, e.label) for e in g.edges} == {
            ("2", "1", "p2c"), ("1", "2", "c2p"),
            ("2", "3", "p2c"), ("3", "2", "c2p"),
            ("1", "3", "p2p"), ("3", "1", "p2p"),
        }
        assert g.has_unit_capacities()

    def test_peers_are_normalized_and_duplicates_dropped(self):
        rels = parse_as_rel_text("5|3|0\n3|5|0\n7|3|-1|bgp\n7|3|-1\n")
        assert rels.records == (AsRelationship(3, 5, "p2p"), AsRelationship(7, 3, "p2c"))

    def test_conflicting_records(self):
        with pytest.raises(ConflictingRelationship):
            parse_as_rel_text("1|2|-1\n2|1|-1\n")
        with pytest.raises(ConflictingRelationship):
            parse_as_rel_text("1|2|-1\n1|2|0\n")

    @pytest.mark.parametrize(
        "text, line",
        [("1|2|-1\n1|1|0\n", 2), ("1|2|5\n", 1), ("1|2\n", 1), ("0|2|-1\n", 1), ("a|b|0\n", 1)],
    )
    def test_malformed_lines(self, text, line):
        with pytest.raises(ParseError) as info:
            parse_as_rel_text(text)
        assert info.value.line == line

    def test_sample_topology(self, sample_graph):
        assert len(sample_graph.nodes) == 10
        assert len(sample_graph.edges) == 22


class TestPeering:
    def test_member_file(self, members):
        assert len(members) == 7
        assert {m.policy for m in members} == {"open", "selective", "restrictive"}

    def test_open_members_get_missing_links(self, sample_graph, members):
        augmented = augment_peering(sample_graph, members, "open")
        added = {(e.src, e.dst) for e in augmented.edges[len(sample_graph.edges):]}
        assert added == {("11", "21"), ("21", "11"), ("13", "21"), ("21", "13")}
        assert all(e.label == "p2p" for e in augmented.edges[len(sample_graph.edges):])

    def test_existing_relationships_win(self, sample_graph, members):
        assert augment_peering(sample_graph, members, "restrictive") is sample_graph

    def test_augmenting_twice_adds_nothing(self, sample_graph, members):
        for mode in ("open", "selective", "restrictive"):
            once = augment_peering(sample_graph, members, mode)
            twice = augment_peering(once, members, mode)
            assert twice is once
            assert twice.edges == once.edges

    def test_unknown_class(self, sample_graph, members):
        with pytest.raises(ParseError):
            augment_peering(sample_graph, members, "closed")

    def test_bad_policy_value(self, tmp_path):
        path = tmp_path / "members.csv"
        path.write_text("asn,policy\n11,sometimes\n", encoding="utf-8")
        with pytest.raises(ParseError) as info:
            load_peering_members(path)
        assert info.value.line == 2

    def test_depeer_removes_both_directions(self, sample_graph):
        cut = depeer(sample_graph, "10", "20")
        assert len(cut.edges) == len(sample_graph.edges) - 2
        assert not any({e.src, e.dst} == {"10", "20"} for e in cut.edges)
        assert cut.nodes == sample_graph.nodes

    def test_next_hop_labels(self, sample_graph):
        relabeled = with_next_hop_labels(sample_graph)
        assert relabeled.edges[2].label == f"{sample_graph.edges[2].label}:{sample_graph.edges[2].dst}"
        assert "p2c:11" in relabeled.alphabet


class TestWeights:
    def test_weight_file(self, weights):
        assert weights.weights["10"] == 16777216
        assert set(weights.restricted_to(["10", "11"]).weights) == {"10", "11"}

    def test_pfx2as(self, data_dir):
        table = aggregate_pfx2as(data_dir / "sample.pfx2as")
        assert table.weights["13"] == 256
        assert table.weights["23"] == 1024
        assert table.weights["20"] == table.weights["30"] == 2 ** 24
        assert "11" not in table.weights

    def test_sampling_is_seeded(self, weights):
        first = weighted_sample_pairs(weights, 50, seed=4)
        assert first == weighted_sample_pairs(weights, 50, seed=4)
        assert all(a != b for a, b in first)

    def test_sampling_needs_two_positive_weights(self):
        with pytest.raises(InsufficientSupport):
            weighted_sample_pairs(WeightTable({"1": 5, "2": 0}), 3, seed=0)

    def test_first_endpoint_follows_weights(self):
        pairs = weighted_sample_pairs(WeightTable({"1": 3, "2": 1, "3": 1}), 100_000, seed=11)
        share = sum(1 for a, _ in pairs if a == "1") / len(pairs)
        assert share == pytest.approx(0.6, abs=0.02)
        assert all(a != b for a, b in pairs)

    def test_two_endpoints_give_both_orders(self):
        pairs = weighted_sample_pairs(WeightTable({"1": 1, "2": 1}), 1000, seed=5)
        assert set(pairs) == {("1", "2"), ("2", "1")}


class TestCustomerCones:
    def test_depth_counts_transit_edges(self, sample_graph):
        assert customer_cone(sample_graph, "10", 1) == {"11", "12", "30"}
        assert customer_cone(sample_graph, "10", 2) == {"11", "12", "13", "30", "31"}

    def test_exclusive_cone_drops_shared_customers(self, sample_graph):
        assert exclusive_customer_cone(sample_graph, "10", ["20"], 2) == {"11", "12", "13"}


class TestExperiments:
    def test_diversity_experiment(self, sample_graph, weights, valley_free):
        result = run_diversity_experiment(sample_graph, weights, 8, seed=3, policy=valley_free)
        assert list(result.frame.columns) == ["source", "sink", "lower", "upper", "exact"]
        assert len(result.frame) == 8
        assert result.summary["pairs"] == 8
        assert result.summary["exact_share"] == 1.0
        again = run_diversity_experiment(sample_graph, weights, 8, seed=3, policy=valley_free)
        pd.testing.assert_frame_equal(result.frame, again.frame)

    def test_summary_uses_population_deviation(self):
        frame = pd.DataFrame({"lower": [1, 3], "upper": [1, 3], "exact": [True, True]})
        summary = summarize(frame)
        assert summary["upper_mean"] == 2.0
        assert summary["upper_std"] == 1.0

    def test_peering_scenarios(self, sample_graph, weights, members, valley_free):
        result = run_peering_class_experiment(sample_graph, weights, members, 6, seed=1, policy=valley_free)
        names = [row["scenario"] for row in result.summary["scenarios"]]
        assert names == ["none", "restrictive", "selective", "open"]
        rows = {row["scenario"]: row for row in result.summary["scenarios"]}
        assert rows["open"]["upper_mean"] >= rows["none"]["upper_mean"]
        assert set(result.frame["scenario"]) == set(names)

    def test_depeering_lowers_cone_diversity(self, sample_graph, valley_free):
        result = run_depeering_experiment(sample_graph, "10", "20", 2, 20, seed=5, policy=valley_free)
        summary = result.summary
        assert (summary["cone_a"], summary["cone_b"]) == (3, 3)
        assert summary["after_mean"] < summary["before_mean"]
        assert summary["difference_percent"] > 0
        assert set(result.frame["source"]) <= {"11", "12", "13"}
        assert set(result.frame["sink"]) <= {"21", "22", "23"}

    def test_depeering_needs_exclusive_cones(self, sample_graph, valley_free):
        with pytest.raises(InsufficientSupport):
            run_depeering_experiment(sample_graph, "30", "10", 2, 5, seed=0, policy=valley_free)

    def test_matrix(self, data_dir):
        g = to_labeled_graph(parse_as_rel(data_dir / "vf_triangle.as-rel"))
        policies = {name: preset(name)[1] for name in ("any", "valley-free")}
        frame = diversity_matrix(g, ["1", "2", "3"], policies)
        assert len(frame) == 12
        view = matrix_view(frame, "valley-free")
        assert list(view.index) == ["1", "2", "3"]
        assert view.loc["1", "3"] == 2
        assert math.isnan(view.loc["1", "1"])

    def test_ccdf(self):
        table = ccdf([1, 1, 2])
        assert list(table["value"]) == [1.0, 2.0]
        assert list(table["ccdf"]) == pytest.approx([1.0, 1 / 3])
        assert ccdf([]).empty

    def test_synthetic_topologies(self):
        tiers = synthetic_tier_one_topology(branching=2, depth=2)
        assert len(tiers.nodes) == 14
        scale_free = synthetic_scale_free(50, m=2, seed=2)
        assert len(scale_free.nodes) == 50
        assert scale_free == synthetic_scale_free(50, m=2, seed=2)
