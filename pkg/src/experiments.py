"""
Experiment harness for inter-domain path diversity.

Every experiment samples AS pairs with a seeded generator, evaluates the
unit-capacity min-cut bounds under a policy, and returns a pandas frame of
per-pair rows together with mean / standard deviation summaries.
"""

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from src.config import get_logger
from src.errors import InsufficientSupport
from src.flow import CutReport, evaluate_pairs
from src.graph_core import EdgeSpec, LabeledDigraph, build_graph
from src.ingest import (
    C2P,
    P2C,
    P2P,
    PEERING_POLICIES,
    PeeringMember,
    WeightTable,
    augment_peering,
    depeer,
    exclusive_customer_cone,
    weighted_sample_pairs,
)
from src.policy_lang import VALLEY_FREE_ALPHABET, PolicyNfa

logger = get_logger(__name__)

PAIR_COLUMNS = ["source", "sink", "lower", "upper", "exact"]


@dataclass
class ExperimentResult:
    frame: pd.DataFrame
    summary: Dict[str, float] = field(default_factory=dict)


def _mean_std(values: Sequence[Fraction]) -> Tuple[float, float]:
    if not len(values):
        return 0.0, 0.0
    array = np.array([float(v) for v in values], dtype=float)
    return float(array.mean()), float(array.std())


def _pair_frame(reports: Sequence[CutReport]) -> pd.DataFrame:
    rows = [
        {"source": r.source, "sink": r.sink, "lower": r.lower, "upper": r.upper, "exact": r.exact}
        for r in reports
    ]
    return pd.DataFrame(rows, columns=PAIR_COLUMNS)


def summarize(frame: pd.DataFrame) -> Dict[str, float]:
    """Mean and population standard deviation of both bounds, plus the share of exact rows."""
    lower_mean, lower_std = _mean_std(list(frame["lower"]))
    upper_mean, upper_std = _mean_std(list(frame["upper"]))
    return {
        "pairs": int(len(frame)),
        "lower_mean": lower_mean,
        "lower_std": lower_std,
        "upper_mean": upper_mean,
        "upper_std": upper_std,
        "exact_share": float(frame["exact"].mean()) if len(frame) else 1.0,
    }


def _evaluate(g: LabeledDigraph, policy: PolicyNfa, pairs, jobs) -> pd.DataFrame:
    return _pair_frame(evaluate_pairs(g.with_unit_capacities(), policy, pairs, jobs))


def run_diversity_experiment(
    g: LabeledDigraph,
    weights: WeightTable,
    n: int,
    seed: int,
    policy: PolicyNfa,
    jobs: Optional[int] = None,
) -> ExperimentResult:
    """Path diversity between n address-weighted AS pairs."""
    pairs = weighted_sample_pairs(weights.restricted_to(g.nodes), n, seed)
    frame = _evaluate(g, policy, pairs, jobs)
    return ExperimentResult(frame, summarize(frame))


def run_peering_class_experiment(
    g: LabeledDigraph,
    weights: WeightTable,
    members: Sequence[PeeringMember],
    n: int,
    seed: int,
    policy: PolicyNfa,
    jobs: Optional[int] = None,
) -> ExperimentResult:
    """
    Same sampled pairs on the base graph and on one graph per peering class.

    Each class graph adds links among that class's members only (not cumulative).
    """
    pairs = weighted_sample_pairs(weights.restricted_to(g.nodes), n, seed)
    scenarios = [("none", g)] + [
        (mode, augment_peering(g, members, mode)) for mode in reversed(PEERING_POLICIES)
    ]

    frames, rows = [], []
    for name, graph in scenarios:
        logger.info("peering scenario %s: %d edges", name, len(graph.edges))
        frame = _evaluate(graph, policy, pairs, jobs)
        frames.append(frame.assign(scenario=name))
        rows.append({"scenario": name, **summarize(frame)})
    return ExperimentResult(pd.concat(frames, ignore_index=True), {"scenarios": rows})


def _as_set(isp: Union[str, Iterable[str]]) -> List[str]:
    return [isp] if isinstance(isp, str) else sorted(set(isp))


def _isp_cone(g: LabeledDigraph, isp: List[str], rival: List[str], depth: int) -> List[str]:
    cone = set()
    for asn in isp:
        cone |= exclusive_customer_cone(g, asn, rival, depth)
    return sorted(cone - set(isp))


def run_depeering_experiment(
    g: LabeledDigraph,
    isp_a: Union[str, Iterable[str]],
    isp_b: Union[str, Iterable[str]],
    depth: int,
    n: int,
    seed: int,
    policy: PolicyNfa,
    weights: Optional[WeightTable] = None,
    jobs: Optional[int] = None,
) -> ExperimentResult:
    """
    Mean diversity between the ISPs' exclusive customer cones before and after they depeer.

    An ISP may be several sibling ASes. Pairs take one AS from each cone,
    weighted by address count when weights are given, uniformly otherwise.
    """
    side_a, side_b = _as_set(isp_a), _as_set(isp_b)
    cone_a = _isp_cone(g, side_a, side_b, depth)
    cone_b = _isp_cone(g, side_b, side_a, depth)
    if not cone_a or not cone_b:
        raise InsufficientSupport(
            "both exclusive customer cones must be non-empty",
            cone_a=len(cone_a),
            cone_b=len(cone_b),
        )

    def probabilities(cone: List[str]) -> Optional[np.ndarray]:
        if weights is None:
            return None
        p = np.array([weights.weights.get(asn, 0) for asn in cone], dtype=float)
        return p / p.sum() if p.sum() > 0 else None

    rng = np.random.default_rng(seed)
    sources = rng.choice(len(cone_a), size=n, p=probabilities(cone_a))
    sinks = rng.choice(len(cone_b), size=n, p=probabilities(cone_b))
    pairs = [(cone_a[a], cone_b[b]) for a, b in zip(sources.tolist(), sinks.tolist())]

    before = _evaluate(g, policy, pairs, jobs)
    after = _evaluate(depeer(g, side_a, side_b), policy, pairs, jobs)
    mean_before, _ = _mean_std(list(before["upper"]))
    mean_after, _ = _mean_std(list(after["upper"]))
    difference = (mean_before - mean_after) / mean_before * 100 if mean_before else 0.0

    frame = before.rename(columns={"lower": "lower_before", "upper": "upper_before", "exact": "exact_before"})
    frame["lower_after"] = after["lower"]
    frame["upper_after"] = after["upper"]
    frame["exact_after"] = after["exact"]
    summary = {
        "pairs": n,
        "cone_a": len(cone_a),
        "cone_b": len(cone_b),
        "before_mean": mean_before,
        "after_mean": mean_after,
        "difference_percent": difference,
    }
    return ExperimentResult(frame, summary)


def diversity_matrix(
    g: LabeledDigraph,
    ases: Sequence[str],
    policies: Dict[str, PolicyNfa],
    jobs: Optional[int] = None,
) -> pd.DataFrame:
    """Bounds for every ordered pair of `ases` under each named policy (long format)."""
    pairs = [(a, b) for a in ases for b in ases if a != b]
    frames = [_evaluate(g, nfa, pairs, jobs).assign(policy=name) for name, nfa in policies.items()]
    return pd.concat(frames, ignore_index=True)[["policy"] + PAIR_COLUMNS]


def matrix_view(frame: pd.DataFrame, policy: str, bound: str = "upper") -> pd.DataFrame:
    """Square source × sink table of one policy's bound."""
    subset = frame[frame["policy"] == policy]
    order = list(dict.fromkeys(list(subset["source"]) + list(subset["sink"])))
    table = subset.pivot(index="source", columns="sink", values=bound)
    return table.reindex(index=order, columns=order)


def ccdf(values: Iterable) -> pd.DataFrame:
    """Fraction of values >= each distinct value."""
    array = np.array([float(v) for v in values], dtype=float)
    if not array.size:
        return pd.DataFrame(columns=["value", "ccdf"])
    distinct, counts = np.unique(array, return_counts=True)
    tail = counts[::-1].cumsum()[::-1] / array.size
    return pd.DataFrame({"value": distinct, "ccdf": tail})


# Synthetic topologies

def synthetic_tier_one_topology(branching: int = 2, depth: int = 2) -> LabeledDigraph:
    """
    Two tier ones `T1a` and `T1b` joined by a single peering link, each above its own customer tree.

    Tree nodes are named `<tier one>.<index>`.
    """
    edges: List[EdgeSpec] = [("T1a", "T1b", P2P, 1), ("T1b", "T1a", P2P, 1)]
    tree = nx.balanced_tree(branching, depth)
    for root in ("T1a", "T1b"):
        def name(i: int) -> str:
            return root if i == 0 else f"{root}.{i}"

        for parent, child in nx.bfs_edges(tree, 0):
            edges.append((name(parent), name(child), P2C, 1))
            edges.append((name(child), name(parent), C2P, 1))
    return build_graph(VALLEY_FREE_ALPHABET, edges)


def synthetic_scale_free(n: int, m: int = 2, seed: int = 0, peer_share: float = 0.2) -> LabeledDigraph:
    """
    Preferential-attachment AS graph with about 2·n·m directed edges.

    The older endpoint of each link is the provider; a `peer_share` fraction of
    links become peerings instead.
    """
    topology = nx.barabasi_albert_graph(n, m, seed=seed)
    rng = random.Random(seed)
    edges: List[EdgeSpec] = []
    for u, v in sorted((min(a, b), max(a, b)) for a, b in topology.edges()):
        a, b = str(u + 1), str(v + 1)
        if rng.random() < peer_share:
            edges.append((a, b, P2P, 1))
            edges.append((b, a, P2P, 1))
        else:
            edges.append((a, b, P2C, 1))
            edges.append((b, a, C2P, 1))
    return build_graph(VALLEY_FREE_ALPHABET, edges, nodes=[str(i + 1) for i in range(n)])
