"""
Labeled directed multigraphs with exact capacities.

Holds the graph type every other module works on, label-restricted edge views,
node splitting for node capacities, and the `src|dst|label|capacity` text format.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, NewType, Optional, Sequence, Tuple, Union

from src.config import get_logger
from src.errors import NonPositiveCapacity, ParseError, ReservedEpsilonLabel, UnknownLabel, UnknownNode

logger = get_logger(__name__)

EPSILON = "eps"

EdgeId = NewType("EdgeId", int)


class Unbounded(Enum):
    """Capacity that never saturates."""
    UNBOUNDED = "inf"

    def __str__(self) -> str:
        return "inf"


UNBOUNDED = Unbounded.UNBOUNDED

Capacity = Union[Fraction, Unbounded]
CapacityLike = Union[int, str, Fraction, Unbounded]


def to_capacity(value: CapacityLike) -> Capacity:
    """Convert an int, rational string, Fraction or 'inf' into a capacity (> 0)."""
    if value is UNBOUNDED:
        return UNBOUNDED
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("inf", "unbounded"):
            return UNBOUNDED
        try:
            capacity = Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise NonPositiveCapacity(f"capacity {value!r} is not a number", value=value) from None
    elif isinstance(value, float):
        capacity = Fraction(value).limit_denominator()
    else:
        capacity = Fraction(value)
    if capacity <= 0:
        raise NonPositiveCapacity(f"capacity must be > 0, got {value}", value=str(value))
    return capacity


def format_capacity(capacity: Capacity) -> str:
    return "inf" if capacity is UNBOUNDED else str(capacity)


def scale(capacity: Capacity, factor: Fraction) -> Capacity:
    return UNBOUNDED if capacity is UNBOUNDED else capacity * factor


@dataclass(frozen=True)
class Edge:
    """One directed, labeled edge; `id` is its stable ordinal in the graph."""
    id: EdgeId
    src: str
    dst: str
    label: str
    capacity: Capacity


@dataclass(frozen=True)
class LabeledDigraph:
    """
    Directed multigraph G = (V, E) with labels l: E -> alphabet and capacities c: E -> Q+ or UNBOUNDED.

    Instances are immutable; every transformation returns a new graph.
    """
    alphabet: FrozenSet[str]
    nodes: Tuple[str, ...]
    edges: Tuple[Edge, ...]

    # Filled by split_nodes: original node -> (in half, out half)
    rename_map: Dict[str, Tuple[str, str]] = field(default_factory=dict, compare=False)

    _out: Dict[str, Tuple[Edge, ...]] = field(init=False, repr=False, compare=False)
    _in: Dict[str, Tuple[Edge, ...]] = field(init=False, repr=False, compare=False)
    _by_label: Dict[str, FrozenSet[EdgeId]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        out: Dict[str, List[Edge]] = {node: [] for node in self.nodes}
        inc: Dict[str, List[Edge]] = {node: [] for node in self.nodes}
        by_label: Dict[str, List[EdgeId]] = {label: [] for label in self.alphabet}
        for edge in self.edges:
            out[edge.src].append(edge)
            inc[edge.dst].append(edge)
            by_label[edge.label].append(edge.id)
        object.__setattr__(self, "_out", {node: tuple(edges) for node, edges in out.items()})
        object.__setattr__(self, "_in", {node: tuple(edges) for node, edges in inc.items()})
        object.__setattr__(self, "_by_label", {label: frozenset(ids) for label, ids in by_label.items()})

    def __contains__(self, node: str) -> bool:
        return node in self._out

    def out_edges(self, node: str) -> Tuple[Edge, ...]:
        return self._out[node]

    def in_edges(self, node: str) -> Tuple[Edge, ...]:
        return self._in[node]

    def edge(self, edge_id: int) -> Edge:
        return self.edges[edge_id]

    def require_node(self, node: str) -> None:
        if node not in self._out:
            raise UnknownNode(f"node {node!r} is not in the graph", node=node)

    def label_ids(self, label: str) -> FrozenSet[EdgeId]:
        return self._by_label[label]

    def remove_edges(self, predicate: Callable[[Edge], bool]) -> "LabeledDigraph":
        """New graph without the edges matching predicate; node set and alphabet unchanged."""
        kept = [(e.src, e.dst, e.label, e.capacity) for e in self.edges if not predicate(e)]
        return build_graph(self.alphabet, kept, nodes=self.nodes)

    def with_unit_capacities(self) -> "LabeledDigraph":
        return build_graph(self.alphabet, [(e.src, e.dst, e.label, 1) for e in self.edges], nodes=self.nodes)

    def scale_capacities(self, factor: int) -> "LabeledDigraph":
        edges = [(e.src, e.dst, e.label, scale(e.capacity, Fraction(factor))) for e in self.edges]
        return build_graph(self.alphabet, edges, nodes=self.nodes)

    def has_unit_capacities(self) -> bool:
        return all(e.capacity == 1 for e in self.edges)


EdgeSpec = Tuple[str, str, str, CapacityLike]


def build_graph(
    alphabet: Iterable[str],
    edges: Sequence[EdgeSpec],
    nodes: Optional[Iterable[str]] = None,
) -> LabeledDigraph:
    """
    Build a labeled digraph from (src, dst, label, capacity) tuples.

    Args:
        alphabet: Declared label alphabet (must not contain the reserved epsilon token)
        edges: Edge tuples; ids follow list order, parallel edges are kept
        nodes: Extra nodes to include (isolated nodes); endpoints are always included

    Returns:
        The immutable graph
    """
    sigma = frozenset(str(symbol) for symbol in alphabet)
    if EPSILON in sigma:
        raise ReservedEpsilonLabel(f"{EPSILON!r} is reserved for automaton transitions")

    ordered: Dict[str, None] = {}
    for node in nodes or ():
        ordered[str(node)] = None

    built: List[Edge] = []
    for index, (src, dst, label, capacity) in enumerate(edges):
        label = str(label)
        if label == EPSILON:
            raise ReservedEpsilonLabel(f"edge {index} uses the reserved label {EPSILON!r}", edge=index)
        if label not in sigma:
            raise UnknownLabel(f"label {label!r} is not in the alphabet", label=label, edge=index)
        src, dst = str(src), str(dst)
        ordered.setdefault(src, None)
        ordered.setdefault(dst, None)
        built.append(Edge(EdgeId(index), src, dst, label, to_capacity(capacity)))

    return LabeledDigraph(alphabet=sigma, nodes=tuple(ordered), edges=tuple(built))


def subgraph_by_label(g: LabeledDigraph, s: str) -> FrozenSet[EdgeId]:
    """Ids of the edges labeled s (the edge set of G_s; nodes are shared with g)."""
    if s not in g.alphabet:
        raise UnknownLabel(f"label {s!r} is not in the alphabet", label=s)
    return g.label_ids(s)


def split_nodes(g: LabeledDigraph, node_spec: Dict[str, Tuple[str, CapacityLike]]) -> LabeledDigraph:
    """
    Replace each listed node v by v_in -> v_out joined by one edge carrying (label, capacity).

    In-edges of v are redirected to v_in and out-edges leave from v_out; the
    returned graph records the renaming in rename_map.
    """
    if not node_spec:
        return g

    for node in node_spec:
        g.require_node(node)

    rename: Dict[str, Tuple[str, str]] = {}
    taken = set(g.nodes)
    for node in g.nodes:
        if node not in node_spec:
            continue
        halves = (f"{node}_in", f"{node}_out")
        for half in halves:
            if half in taken:
                raise UnknownNode(f"split name {half!r} collides with an existing node", node=half)
        rename[node] = halves

    alphabet = set(g.alphabet) | {label for label, _ in node_spec.values()}

    nodes: List[str] = []
    for node in g.nodes:
        nodes.extend(rename.get(node, (node,)))

    edges: List[EdgeSpec] = []
    for e in g.edges:
        src = rename[e.src][1] if e.src in rename else e.src
        dst = rename[e.dst][0] if e.dst in rename else e.dst
        edges.append((src, dst, e.label, e.capacity))
    for node, (label, capacity) in node_spec.items():
        v_in, v_out = rename[node]
        edges.append((v_in, v_out, label, capacity))

    split = build_graph(alphabet, edges, nodes=nodes)
    object.__setattr__(split, "rename_map", rename)
    logger.debug("split %d nodes", len(rename))
    return split


def contract_split(g: LabeledDigraph) -> LabeledDigraph:
    """Undo split_nodes: merge each (v_in, v_out) pair back into v and drop the joining edge."""
    if not g.rename_map:
        return g
    merged = {}
    joins = set()
    for node, (v_in, v_out) in g.rename_map.items():
        merged[v_in] = node
        merged[v_out] = node
        joins.add((v_in, v_out))

    nodes: Dict[str, None] = {}
    for node in g.nodes:
        nodes.setdefault(merged.get(node, node), None)

    # Original edges never run v_in -> v_out, so every such edge is a joining edge
    edges: List[EdgeSpec] = []
    join_labels = set()
    for e in g.edges:
        if (e.src, e.dst) in joins:
            join_labels.add(e.label)
            continue
        edges.append((merged.get(e.src, e.src), merged.get(e.dst, e.dst), e.label, e.capacity))

    used_labels = {label for _, _, label, _ in edges}
    return build_graph((g.alphabet - join_labels) | used_labels, edges, nodes=nodes)


# Text format

def parse_graph_text(text: str, alphabet: Optional[Iterable[str]] = None) -> LabeledDigraph:
    """
    Parse `src|dst|label|capacity` lines.

    '#' starts a comment; a `# alphabet: a b c` comment declares the alphabet,
    otherwise the labels seen are used. Capacity may be an integer, a rational
    `p/q`, or `inf`.
    """
    declared = set(alphabet) if alphabet is not None else None
    edges: List[EdgeSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("alphabet:") and declared is None:
                declared = set(body.split(":", 1)[1].split())
            continue
        parts = [part.strip() for part in line.split("|")]
        if len(parts) != 4 or not all(parts):
            raise ParseError(lineno, "expected src|dst|label|capacity")
        src, dst, label, capacity = parts
        try:
            edges.append((src, dst, label, to_capacity(capacity)))
        except NonPositiveCapacity as exc:
            raise ParseError(lineno, exc.message) from None

    sigma = declared if declared is not None else {label for _, _, label, _ in edges}
    return build_graph(sigma, edges)


def load_graph(path: Union[str, Path], alphabet: Optional[Iterable[str]] = None) -> LabeledDigraph:
    """Load a graph file in the text format."""
    text = Path(path).read_text(encoding="utf-8")
    graph = parse_graph_text(text, alphabet)
    logger.info("loaded %s: %d nodes, %d edges", path, len(graph.nodes), len(graph.edges))
    return graph


def dump_graph(g: LabeledDigraph) -> str:
    """Serialize a graph in the text format (alphabet header included)."""
    lines = [f"# alphabet: {' '.join(sorted(g.alphabet))}"]
    for e in g.edges:
        lines.append(f"{e.src}|{e.dst}|{e.label}|{format_capacity(e.capacity)}")
    return "\n".join(lines) + "\n"
