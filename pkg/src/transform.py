"""
Transformed graph construction.

The policy NFA is reduced to one accepting state, each symbol's transitions
are split into Cartesian-product blocks, every block is funneled through
aggregator states, and the graph is multiplied with the resulting automaton.
Source→sink paths of the product are exactly the policy-compliant paths of the
original graph; mapped edges carry the original capacity (upper bound) and
that capacity divided by the symbol's block count (lower bound).
"""

from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Tuple

import pandas as pd

from src.config import get_logger
from src.decomposition import TransitionDecomposition, decompose_all
from src.errors import AlphabetMismatch, FlowError, MultipleTerminals, SourceEqualsSink
from src.graph_core import EPSILON, UNBOUNDED, Capacity, EdgeId, LabeledDigraph, format_capacity, scale
from src.policy_lang import PolicyNfa, normalize_terminals

logger = get_logger(__name__)

ProductNode = Tuple[str, str]

MAPPED = "mapped"
EPSILON_EDGE = "epsilon"


@dataclass(frozen=True)
class AggregatedBlock:
    """A decomposition block after aggregation: one state pair carrying the whole block."""
    symbol: str
    index: int
    pair: Tuple[str, str]
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]


@dataclass(frozen=True)
class AugmentedNfa:
    base: PolicyNfa
    decompositions: Dict[str, TransitionDecomposition]
    states: Tuple[str, ...]
    aggregator_states: FrozenSet[str]
    epsilon_pairs: Tuple[Tuple[str, str], ...]
    epsilon_additions: Tuple[Tuple[str, str], ...]
    aggregated: Dict[str, Tuple[AggregatedBlock, ...]]

    @property
    def start(self) -> str:
        return self.base.start

    @property
    def terminal(self) -> str:
        return next(iter(self.base.accepting))

    @property
    def n_s(self) -> Dict[str, int]:
        return {symbol: d.n_s for symbol, d in self.decompositions.items()}

    @property
    def exact(self) -> bool:
        return all(d.exact for d in self.decompositions.values())


def _aggregator_name(base: str, taken: set) -> str:
    name = base
    while name in taken:
        name += "#"
    taken.add(name)
    return name


def augment_aggregators(
    nfa: PolicyNfa,
    decomps: Optional[Dict[str, TransitionDecomposition]] = None,
) -> AugmentedNfa:
    """
    Route each decomposition block through aggregator states.

    A block with several source states gets an entry aggregator `s'k` reached
    from each source by an epsilon pair; a block with several target states
    gets an exit aggregator `s''k` with epsilon pairs to each target. The block
    then becomes a single transition between the two sides.
    """
    if len(nfa.accepting) != 1:
        raise MultipleTerminals(
            f"expected one accepting state, found {len(nfa.accepting)}; normalize the policy first",
            accepting=len(nfa.accepting),
        )
    decomps = decompose_all(nfa) if decomps is None else decomps

    taken = set(nfa.states)
    states = list(nfa.states)
    aggregators: List[str] = []
    additions: List[Tuple[str, str]] = []
    aggregated: Dict[str, Tuple[AggregatedBlock, ...]] = {}

    for symbol, decomposition in decomps.items():
        blocks = []
        for k, block in enumerate(decomposition.blocks):
            entry = block.sources[0]
            if len(block.sources) > 1:
                entry = _aggregator_name(f"{symbol}'{k}", taken)
                aggregators.append(entry)
                additions.extend((q, entry) for q in block.sources)
            exit_ = block.targets[0]
            if len(block.targets) > 1:
                exit_ = _aggregator_name(f"{symbol}''{k}", taken)
                aggregators.append(exit_)
                additions.extend((exit_, q) for q in block.targets)
            blocks.append(AggregatedBlock(symbol, k, (entry, exit_), block.sources, block.targets))
        aggregated[symbol] = tuple(blocks)

    states.extend(aggregators)
    epsilon_pairs = tuple(dict.fromkeys(list(nfa.epsilon_transitions) + additions))
    if aggregators:
        logger.debug("added %d aggregator states", len(aggregators))

    return AugmentedNfa(
        base=nfa,
        decompositions=decomps,
        states=tuple(states),
        aggregator_states=frozenset(aggregators),
        epsilon_pairs=epsilon_pairs,
        epsilon_additions=tuple(additions),
        aggregated=aggregated,
    )


def prepare_policy(nfa: PolicyNfa, exact_limit: Optional[int] = None) -> AugmentedNfa:
    """normalize_terminals, decompose_all and augment_aggregators in one step."""
    normalized = normalize_terminals(nfa)
    return augment_aggregators(normalized, decompose_all(normalized, exact_limit))


@dataclass(frozen=True)
class ProductEdge:
    """Edge of the transformed graph with its provenance."""
    index: int
    src: ProductNode
    dst: ProductNode
    kind: str
    cap_upper: Capacity
    cap_lower: Capacity
    edge_id: Optional[EdgeId] = None
    symbol: Optional[str] = None
    block: Optional[int] = None


@dataclass(frozen=True)
class TransformedGraph:
    nodes: Tuple[ProductNode, ...]
    edges: Tuple[ProductEdge, ...]
    source: ProductNode
    sink: ProductNode
    graph: LabeledDigraph = field(repr=False)
    augmented: AugmentedNfa = field(repr=False)
    pruned: bool = False

    _out: Dict[ProductNode, Tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        out: Dict[ProductNode, List[int]] = {node: [] for node in self.nodes}
        for edge in self.edges:
            out[edge.src].append(edge.index)
        object.__setattr__(self, "_out", {node: tuple(ids) for node, ids in out.items()})

    def out_edges(self, node: ProductNode) -> Tuple[int, ...]:
        return self._out.get(node, ())

    @property
    def exact(self) -> bool:
        return self.augmented.exact

    def stats(self) -> Dict[str, int]:
        mapped = sum(1 for e in self.edges if e.kind == MAPPED)
        return {
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "mapped_edges": mapped,
            "epsilon_edges": len(self.edges) - mapped,
            "augmented_states": len(self.augmented.states),
            "aggregator_states": len(self.augmented.aggregator_states),
        }


def tensor_transform(g: LabeledDigraph, aug: AugmentedNfa, v1: str, vn: str) -> TransformedGraph:
    """
    Multiply g with the augmented automaton.

    Nodes are all (v, q) pairs. Each graph edge labeled s yields one mapped edge
    per aggregated block of s; each epsilon pair yields an unbounded edge
    inside every graph node. The source is (v1, start), the sink (vn, terminal).
    """
    g.require_node(v1)
    g.require_node(vn)
    if v1 == vn:
        raise SourceEqualsSink("source and sink must differ", node=v1)
    missing = g.alphabet - aug.base.alphabet
    if missing:
        raise AlphabetMismatch(
            "graph labels are missing from the policy alphabet",
            labels=" ".join(sorted(missing)),
        )

    nodes = tuple((v, q) for v in g.nodes for q in aug.states)
    edges: List[ProductEdge] = []
    for e in g.edges:
        blocks = aug.aggregated.get(e.label, ())
        lower = scale(e.capacity, Fraction(1, len(blocks))) if blocks else e.capacity
        for block in blocks:
            q1, q2 = block.pair
            edges.append(ProductEdge(
                index=len(edges),
                src=(e.src, q1),
                dst=(e.dst, q2),
                kind=MAPPED,
                cap_upper=e.capacity,
                cap_lower=lower,
                edge_id=e.id,
                symbol=e.label,
                block=block.index,
            ))
    for v in g.nodes:
        for q1, q2 in aug.epsilon_pairs:
            edges.append(ProductEdge(len(edges), (v, q1), (v, q2), EPSILON_EDGE, UNBOUNDED, UNBOUNDED))

    tg = TransformedGraph(nodes, tuple(edges), (v1, aug.start), (vn, aug.terminal), g, aug)
    logger.debug("transformed graph: %d nodes, %d edges", len(nodes), len(edges))
    return tg


def _reachable(start: ProductNode, adjacency: Dict[ProductNode, List[ProductNode]]) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        for nxt in adjacency.get(queue.popleft(), ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def prune_unreachable(tg: TransformedGraph) -> TransformedGraph:
    """Keep only nodes reachable from the source that also reach the sink (plus both terminals)."""
    forward: Dict[ProductNode, List[ProductNode]] = {}
    backward: Dict[ProductNode, List[ProductNode]] = {}
    for e in tg.edges:
        forward.setdefault(e.src, []).append(e.dst)
        backward.setdefault(e.dst, []).append(e.src)

    keep = _reachable(tg.source, forward) & _reachable(tg.sink, backward)
    keep |= {tg.source, tg.sink}

    nodes = tuple(node for node in tg.nodes if node in keep)
    edges = []
    for e in tg.edges:
        if e.src in keep and e.dst in keep:
            edges.append(replace(e, index=len(edges)))
    logger.debug("pruned transformed graph to %d nodes, %d edges", len(nodes), len(edges))
    return replace(tg, nodes=nodes, edges=tuple(edges), pruned=True)


def retarget(tg: TransformedGraph, v1: str, vn: str) -> TransformedGraph:
    """Same unpruned product with another source/sink pair (batch queries reuse one build)."""
    if tg.pruned:
        raise FlowError("retarget needs the unpruned transformed graph")
    tg.graph.require_node(v1)
    tg.graph.require_node(vn)
    if v1 == vn:
        raise SourceEqualsSink("source and sink must differ", node=v1)
    return replace(tg, source=(v1, tg.augmented.start), sink=(vn, tg.augmented.terminal))


def node_name(node: ProductNode) -> str:
    return f"{node[0]}@{node[1]}"


def dump_transformed(tg: TransformedGraph) -> Tuple[str, str]:
    """
    Serialize the transformed graph.

    Returns:
        (graph text with `v@q` node names and upper capacities,
         provenance CSV with index,kind,edge_id,symbol,block,cap_upper,cap_lower)
    """
    labels = sorted({e.symbol for e in tg.edges if e.symbol is not None} | {EPSILON})
    lines = [
        f"# alphabet: {' '.join(labels)}",
        f"# source: {node_name(tg.source)}",
        f"# sink: {node_name(tg.sink)}",
    ]
    rows = []
    for e in tg.edges:
        label = e.symbol if e.kind == MAPPED else EPSILON
        lines.append(f"{node_name(e.src)}|{node_name(e.dst)}|{label}|{format_capacity(e.cap_upper)}")
        rows.append({
            "index": e.index,
            "kind": e.kind,
            "edge_id": "" if e.edge_id is None else e.edge_id,
            "symbol": e.symbol or "",
            "block": "" if e.block is None else e.block,
            "cap_upper": format_capacity(e.cap_upper),
            "cap_lower": format_capacity(e.cap_lower),
        })
    columns = ["index", "kind", "edge_id", "symbol", "block", "cap_upper", "cap_lower"]
    provenance = pd.DataFrame(rows, columns=columns).to_csv(index=False, lineterminator="\n")
    return "\n".join(lines) + "\n", provenance
