"""
Max-flow / min-cut over transformed graphs.

Capacities are exact rationals (or UNBOUNDED). A run scales every finite
capacity by the lcm of the denominators so augmentation works on integers,
then reports the value back as a Fraction.
"""

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from src.config import get_logger, get_settings
from src.errors import FlowError, SourceEqualsSink, UnboundedFlow
from src.graph_core import UNBOUNDED, EdgeId, LabeledDigraph
from src.policy_lang import PolicyNfa
from src.transform import (
    MAPPED,
    AugmentedNfa,
    TransformedGraph,
    prepare_policy,
    prune_unreachable,
    retarget,
    tensor_transform,
)

logger = get_logger(__name__)

UPPER = "upper"
LOWER = "lower"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FlowResult:
    value: Fraction
    edge_flows: Dict[int, Fraction]
    mode: str


def max_flow(tg: TransformedGraph, mode: str = UPPER) -> FlowResult:
    """
    Maximum source→sink flow under cap_upper or cap_lower.

    Shortest augmenting paths (BFS), scanning edges in index order so the
    result is deterministic.
    """
    if mode not in (UPPER, LOWER):
        raise FlowError(f"unknown capacity mode {mode!r}", mode=mode)
    if tg.source == tg.sink:
        raise SourceEqualsSink("source and sink must differ")

    capacities = [e.cap_upper if mode == UPPER else e.cap_lower for e in tg.edges]
    denominator = 1
    for capacity in capacities:
        if capacity is not UNBOUNDED:
            denominator = denominator * capacity.denominator // math.gcd(denominator, capacity.denominator)
    caps = [math.inf if c is UNBOUNDED else int(c * denominator) for c in capacities]

    index = {node: i for i, node in enumerate(tg.nodes)}
    tails = [index[e.src] for e in tg.edges]
    heads = [index[e.dst] for e in tg.edges]
    adjacency: List[List[int]] = [[] for _ in tg.nodes]
    for i in range(len(tg.edges)):
        adjacency[tails[i]].append(2 * i)
        adjacency[heads[i]].append(2 * i + 1)

    source, sink = index[tg.source], index[tg.sink]
    flows = [0] * len(tg.edges)
    total = 0
    while True:
        parent = [-1] * len(tg.nodes)
        parent[source] = -2
        queue = deque([source])
        while queue and parent[sink] == -1:
            u = queue.popleft()
            for arc in adjacency[u]:
                e = arc >> 1
                if arc & 1:
                    v, residual = tails[e], flows[e]
                else:
                    v, residual = heads[e], caps[e] - flows[e]
                if residual > 0 and parent[v] == -1:
                    parent[v] = arc
                    queue.append(v)
        if parent[sink] == -1:
            break

        bottleneck = math.inf
        v = sink
        while v != source:
            arc = parent[v]
            e = arc >> 1
            if arc & 1:
                bottleneck = min(bottleneck, flows[e])
                v = heads[e]
            else:
                bottleneck = min(bottleneck, caps[e] - flows[e])
                v = tails[e]
        if bottleneck == math.inf:
            raise UnboundedFlow("source and sink are joined by unbounded edges only")

        v = sink
        while v != source:
            arc = parent[v]
            e = arc >> 1
            if arc & 1:
                flows[e] -= bottleneck
                v = heads[e]
            else:
                flows[e] += bottleneck
                v = tails[e]
        total += bottleneck

    edge_flows = {i: Fraction(f, denominator) for i, f in enumerate(flows) if f}
    return FlowResult(Fraction(total, denominator), edge_flows, mode)


@dataclass(frozen=True)
class ProjectedPath:
    """A realizing path in the original graph with the flow it carries."""
    edges: Tuple[EdgeId, ...]
    nodes: Tuple[str, ...]
    labels: Tuple[str, ...]
    flow: Fraction

    def to_text(self) -> str:
        parts = [self.nodes[0]]
        for label, node in zip(self.labels, self.nodes[1:]):
            parts.append(f"-{label}->{node}")
        return "".join(parts)


def extract_paths(tg: TransformedGraph, flow: FlowResult) -> List[ProjectedPath]:
    """
    Decompose the flow into source→sink paths and project them onto the original graph.

    Cycles met during decomposition are cancelled and dropped. Epsilon edges
    vanish in the projection; identical projections are merged.
    """
    remaining = dict(flow.edge_flows)
    found: Dict[Tuple[EdgeId, ...], Fraction] = {}

    def next_edge(node) -> Optional[int]:
        for i in tg.out_edges(node):
            if remaining.get(i, 0) > 0:
                return i
        return None

    while True:
        walk: List[int] = []
        position = {tg.source: 0}
        node = tg.source
        first = next_edge(node)
        if first is None:
            break
        while node != tg.sink:
            i = next_edge(node)
            if i is None:
                if node == tg.source and not walk:
                    break
                raise FlowError("flow is not conserved", node=str(node))
            walk.append(i)
            node = tg.edges[i].dst
            if node in position:
                cycle = walk[position[node]:]
                amount = min(remaining[j] for j in cycle)
                for j in cycle:
                    remaining[j] -= amount
                del walk[position[node]:]
                position = {n: p for n, p in position.items() if p <= position[node]}
            else:
                position[node] = len(walk)
        if node != tg.sink:
            continue
        amount = min(remaining[j] for j in walk)
        for j in walk:
            remaining[j] -= amount
        key = tuple(tg.edges[j].edge_id for j in walk if tg.edges[j].kind == MAPPED)
        found[key] = found.get(key, Fraction(0)) + amount

    paths = []
    for edge_ids, amount in found.items():
        edges = [tg.graph.edge(i) for i in edge_ids]
        nodes = (tg.source[0],) + tuple(e.dst for e in edges)
        paths.append(ProjectedPath(edge_ids, nodes, tuple(e.label for e in edges), amount))
    paths.sort(key=lambda p: (p.nodes, p.edges))
    return paths


@dataclass(frozen=True)
class CutReport:
    lower: Fraction
    upper: Fraction
    exact: bool
    paths: Tuple[ProjectedPath, ...]
    policy: str
    source: str
    sink: str
    n_s: Dict[str, int] = field(default_factory=dict)
    minimal: Dict[str, str] = field(default_factory=dict)
    stats: Dict[str, int] = field(default_factory=dict)

    def to_dict(self, with_paths: bool = True) -> Dict:
        record = {
            "schema_version": SCHEMA_VERSION,
            "policy": self.policy,
            "source": self.source,
            "sink": self.sink,
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "n_s": dict(self.n_s),
            "minimal": dict(self.minimal),
            "transformed": dict(self.stats),
        }
        if self.exact:
            record["value"] = self.upper
        if with_paths:
            record["paths"] = [
                {
                    "nodes": list(p.nodes),
                    "labels": list(p.labels),
                    "edge_ids": [int(i) for i in p.edges],
                    "flow": p.flow,
                }
                for p in self.paths
            ]
        return record


PolicyInput = Union[PolicyNfa, AugmentedNfa]


def _as_augmented(policy: PolicyInput) -> AugmentedNfa:
    return policy if isinstance(policy, AugmentedNfa) else prepare_policy(policy)


def bounds_on(tg: TransformedGraph, policy: str = "", prune: bool = True) -> CutReport:
    """Run both max-flows on an already transformed graph."""
    unpruned_stats = tg.stats()
    if prune:
        tg = prune_unreachable(tg)
    upper = max_flow(tg, UPPER)
    # Identical capacity functions when every n_s <= 1
    lower = upper if tg.exact else max_flow(tg, LOWER)
    paths = extract_paths(tg, upper)

    aug = tg.augmented
    return CutReport(
        lower=lower.value,
        upper=upper.value,
        exact=tg.exact,
        paths=tuple(paths),
        policy=policy or aug.base.description,
        source=tg.source[0],
        sink=tg.sink[0],
        n_s=aug.n_s,
        minimal={s: d.minimality.value for s, d in aug.decompositions.items()},
        stats={**unpruned_stats, "pruned_nodes": len(tg.nodes), "pruned_edges": len(tg.edges)},
    )


def min_cut_bounds(
    g: LabeledDigraph,
    nfa: PolicyInput,
    v1: str,
    vn: str,
    prune: bool = True,
) -> CutReport:
    """
    Lower and upper bounds on the policy-compliant min-cut between v1 and vn.

    The bounds coincide (exact=True) when every symbol's transitions form a
    single Cartesian product.
    """
    policy = nfa.description if isinstance(nfa, PolicyNfa) else nfa.base.description
    aug = _as_augmented(nfa)
    report = bounds_on(tensor_transform(g, aug, v1, vn), policy, prune)
    logger.info("%s -> %s: lower=%s upper=%s exact=%s", v1, vn, report.lower, report.upper, report.exact)
    return report


# Batch queries

_WORKER_GRAPH: Optional[TransformedGraph] = None


def _init_worker(tg: TransformedGraph) -> None:
    global _WORKER_GRAPH
    _WORKER_GRAPH = tg


def _evaluate_on(tg: TransformedGraph, pair: Tuple[str, str], policy: str) -> CutReport:
    return bounds_on(retarget(tg, *pair), policy)


def _evaluate_in_worker(args: Tuple[Tuple[str, str], str]) -> CutReport:
    pair, policy = args
    return _evaluate_on(_WORKER_GRAPH, pair, policy)


def evaluate_pairs(
    g: LabeledDigraph,
    nfa: PolicyInput,
    pairs: Sequence[Tuple[str, str]],
    jobs: Optional[int] = None,
) -> List[CutReport]:
    """
    Bounds for many (source, sink) pairs over one graph, in input order.

    The product graph is built once and retargeted per pair; with jobs > 1 the
    pairs are spread over worker processes.
    """
    if not pairs:
        return []
    jobs = get_settings().jobs if jobs is None else jobs
    policy = nfa.description if isinstance(nfa, PolicyNfa) else nfa.base.description
    aug = _as_augmented(nfa)
    base = tensor_transform(g, aug, *pairs[0])

    logger.info("evaluating %d pairs with %d worker(s)", len(pairs), jobs)
    if jobs <= 1:
        return [_evaluate_on(base, pair, policy) for pair in pairs]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(base,)) as pool:
        return list(pool.map(_evaluate_in_worker, [(pair, policy) for pair in pairs]))
