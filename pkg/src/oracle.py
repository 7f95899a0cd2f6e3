"""
Brute-force ground truth for small instances.

Enumerates policy-compliant walks directly on the original graph, with its own
NFA simulation, then packs them: integrally for path diversity and
fractionally (exact rational simplex) for bisection bandwidth. Not meant for
graphs beyond a handful of nodes.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from src.config import get_logger, get_settings
from src.errors import ExplosionGuard, OracleError, SourceEqualsSink
from src.graph_core import EPSILON, UNBOUNDED, EdgeId, LabeledDigraph
from src.policy_lang import PolicyNfa
from src.transform import prepare_policy

logger = get_logger(__name__)


class NfaSimulator:
    """Subset simulation straight from the transition list."""

    def __init__(self, nfa: PolicyNfa):
        self.accepting = frozenset(nfa.accepting)
        self.moves: Dict[Tuple[str, str], List[str]] = {}
        for q1, symbol, q2 in nfa.transitions:
            self.moves.setdefault((q1, symbol), []).append(q2)
        self.initial = self.close({nfa.start})

    def close(self, states) -> FrozenSet[str]:
        closure = set(states)
        pending = list(closure)
        while pending:
            q = pending.pop()
            for r in self.moves.get((q, EPSILON), ()):
                if r not in closure:
                    closure.add(r)
                    pending.append(r)
        return frozenset(closure)

    def advance(self, states: FrozenSet[str], symbol: str) -> FrozenSet[str]:
        return self.close(r for q in states for r in self.moves.get((q, symbol), ()))

    def accepts(self, word: Sequence[str]) -> bool:
        states = self.initial
        for symbol in word:
            states = self.advance(states, symbol)
        return bool(states & self.accepting)


@dataclass(frozen=True)
class CompliantPathSet:
    paths: Tuple[Tuple[EdgeId, ...], ...]
    max_len: int
    node_simple: bool = False

    def __len__(self) -> int:
        return len(self.paths)


def repeat_limits(nfa: PolicyNfa, exact_limit: Optional[int] = None) -> Dict[str, int]:
    """
    Per-label edge reuse allowed for walks that the transformed graph can route.

    A simple path in the product graph crosses each (edge, block) copy once, so
    its projection uses an edge labeled s at most n_s times.
    """
    return {symbol: max(1, n) for symbol, n in prepare_policy(nfa, exact_limit).n_s.items()}


def enumerate_compliant_paths(
    g: LabeledDigraph,
    nfa: PolicyNfa,
    v1: str,
    vn: str,
    max_len: Optional[int] = None,
    node_simple: bool = False,
    frontier_limit: Optional[int] = None,
    max_uses: Optional[Dict[str, int]] = None,
) -> CompliantPathSet:
    """
    All v1→vn edge sequences of length 1..max_len whose label string the NFA accepts.

    Walks may revisit nodes but by default never repeat an edge; max_uses
    raises that to a per-label count. With node_simple=True nodes may not
    repeat either. max_len defaults to the total number of edge uses allowed.
    """
    g.require_node(v1)
    g.require_node(vn)
    if v1 == vn:
        raise SourceEqualsSink("source and sink must differ", node=v1)
    caps = {e.id: (max_uses or {}).get(e.label, 1) for e in g.edges}
    max_len = sum(caps.values()) if max_len is None else max_len
    if max_len < 1:
        raise OracleError("max_len must be at least 1", max_len=max_len)
    limit = get_settings().oracle_frontier_limit if frontier_limit is None else frontier_limit

    simulator = NfaSimulator(nfa)
    found: List[Tuple[EdgeId, ...]] = []
    expanded = 0

    # Iterative DFS; each frame is (node, nfa states, edge ids, visited nodes)
    stack = [(v1, simulator.initial, (), frozenset([v1]))]
    while stack:
        node, states, walk, visited = stack.pop()
        expanded += 1
        if expanded > limit:
            raise ExplosionGuard(
                f"path enumeration exceeded {limit} expansions", limit=limit, found=len(found)
            )
        if walk and node == vn and states & simulator.accepting:
            found.append(walk)
        if len(walk) == max_len:
            continue
        for e in reversed(g.out_edges(node)):
            if walk.count(e.id) >= caps[e.id] or (node_simple and e.dst in visited):
                continue
            nxt = simulator.advance(states, e.label)
            if not nxt:
                continue
            stack.append((e.dst, nxt, walk + (e.id,), visited | {e.dst}))

    found.sort()
    logger.debug("enumerated %d compliant paths %s -> %s", len(found), v1, vn)
    return CompliantPathSet(tuple(found), max_len, node_simple)


def max_disjoint_packing(pset: CompliantPathSet, path_limit: Optional[int] = None) -> int:
    """Largest number of pairwise edge-disjoint paths in pset (branch and bound)."""
    limit = get_settings().oracle_path_limit if path_limit is None else path_limit
    if len(pset.paths) > limit:
        raise ExplosionGuard(
            f"{len(pset.paths)} paths exceed the packing limit of {limit}", limit=limit, paths=len(pset.paths)
        )

    paths = sorted(pset.paths, key=lambda p: (len(p), p))
    masks = []
    for path in paths:
        mask = 0
        for edge_id in path:
            mask |= 1 << edge_id
        masks.append(mask)
    best = 0

    def search(start: int, used: int, count: int) -> None:
        nonlocal best
        best = max(best, count)
        candidates = [j for j in range(start, len(paths)) if not masks[j] & used]
        if not candidates:
            return
        # Disjoint paths have distinct first edges and distinct last edges
        bound = min(len({paths[j][0] for j in candidates}), len({paths[j][-1] for j in candidates}))
        if count + bound <= best:
            return
        j = candidates[0]
        search(j + 1, used | masks[j], count + 1)
        search(j + 1, used, count)

    search(0, 0, 0)
    return best


def _simplex_max(rows: List[List[Fraction]], bounds: List[Fraction]) -> Fraction:
    """
    max sum(x) subject to rows·x <= bounds, x >= 0, with bounds >= 0.

    Dense tableau, Bland's rule, exact Fractions.
    """
    m = len(rows)
    n = len(rows[0]) if rows else 0
    tableau = [row[:] + [Fraction(int(i == k)) for k in range(m)] + [bounds[i]] for i, row in enumerate(rows)]
    objective = [Fraction(-1)] * n + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]

    while True:
        entering = next((j for j in range(n + m) if objective[j] < 0), None)
        if entering is None:
            return objective[-1]
        leaving = None
        for i in range(m):
            a = tableau[i][entering]
            if a > 0:
                ratio = tableau[i][-1] / a
                if leaving is None or ratio < best_ratio or (ratio == best_ratio and basis[i] < basis[leaving]):
                    leaving, best_ratio = i, ratio
        if leaving is None:
            raise OracleError("path packing is unbounded")

        pivot = tableau[leaving][entering]
        tableau[leaving] = [value / pivot for value in tableau[leaving]]
        for i in range(m):
            if i != leaving and tableau[i][entering] != 0:
                factor = tableau[i][entering]
                tableau[i] = [a - factor * b for a, b in zip(tableau[i], tableau[leaving])]
        factor = objective[entering]
        objective = [a - factor * b for a, b in zip(objective, tableau[leaving])]
        basis[leaving] = entering


def oracle_bisection(
    g: LabeledDigraph,
    nfa: PolicyNfa,
    v1: str,
    vn: str,
    max_len: Optional[int] = None,
    pset: Optional[CompliantPathSet] = None,
    path_limit: Optional[int] = None,
) -> Fraction:
    """
    Maximum total flow over the enumerated compliant paths under edge capacities.

    Solves the fractional path-packing LP exactly; capacities must be finite.
    """
    pset = enumerate_compliant_paths(g, nfa, v1, vn, max_len) if pset is None else pset
    limit = get_settings().oracle_path_limit if path_limit is None else path_limit
    if len(pset.paths) > limit:
        raise ExplosionGuard(
            f"{len(pset.paths)} paths exceed the packing limit of {limit}", limit=limit, paths=len(pset.paths)
        )
    if not pset.paths:
        return Fraction(0)

    edge_ids = sorted({edge_id for path in pset.paths for edge_id in path})
    rows, bounds = [], []
    for edge_id in edge_ids:
        capacity = g.edge(edge_id).capacity
        if capacity is UNBOUNDED:
            raise OracleError("oracle bisection needs finite capacities", edge=int(edge_id))
        rows.append([Fraction(path.count(edge_id)) for path in pset.paths])
        bounds.append(Fraction(capacity))
    return _simplex_max(rows, bounds)


def oracle_diversity(
    g: LabeledDigraph,
    nfa: PolicyNfa,
    v1: str,
    vn: str,
    max_len: Optional[int] = None,
    node_simple: bool = False,
) -> int:
    return max_disjoint_packing(enumerate_compliant_paths(g, nfa, v1, vn, max_len, node_simple))


@dataclass(frozen=True)
class OracleReport:
    paths: CompliantPathSet
    diversity: int
    node_simple_diversity: int
    bisection: Optional[Fraction]
    reuse_bisection: Optional[Fraction] = None

    @property
    def readings_agree(self) -> bool:
        return self.diversity == self.node_simple_diversity

    def to_dict(self, g: LabeledDigraph) -> Dict:
        return {
            "diversity": self.diversity,
            "node_simple_diversity": self.node_simple_diversity,
            "readings_agree": self.readings_agree,
            "bisection": self.bisection,
            "reuse_bisection": self.reuse_bisection,
            "max_len": self.paths.max_len,
            "paths": [[f"{g.edge(i).src}-{g.edge(i).label}->{g.edge(i).dst}" for i in p] for p in self.paths.paths],
        }


def run_oracle(
    g: LabeledDigraph,
    nfa: PolicyNfa,
    v1: str,
    vn: str,
    max_len: Optional[int] = None,
    frontier_limit: Optional[int] = None,
    path_limit: Optional[int] = None,
) -> OracleReport:
    """
    Edge-simple and node-simple diversity plus bisection; the two path readings are compared, never merged.

    reuse_bisection repeats the packing LP over walks that may use an edge
    labeled s up to n_s times. On cyclic graphs with a non-exact policy it can
    exceed the edge-simple bisection, and it is the value the min-cut bounds
    bracket.
    """
    pset = enumerate_compliant_paths(g, nfa, v1, vn, max_len, frontier_limit=frontier_limit)
    simple = enumerate_compliant_paths(g, nfa, v1, vn, max_len, node_simple=True, frontier_limit=frontier_limit)
    diversity = max_disjoint_packing(pset, path_limit)
    node_simple = max_disjoint_packing(simple, path_limit)
    if diversity != node_simple:
        logger.warning("edge-simple diversity %d differs from node-simple %d", diversity, node_simple)

    bisection = reuse_bisection = None
    if all(e.capacity is not UNBOUNDED for e in g.edges):
        bisection = oracle_bisection(g, nfa, v1, vn, pset=pset, path_limit=path_limit)
        limits = repeat_limits(nfa)
        if any(n > 1 for n in limits.values()):
            reuse = enumerate_compliant_paths(
                g, nfa, v1, vn, frontier_limit=frontier_limit, max_uses=limits
            )
            reuse_bisection = oracle_bisection(g, nfa, v1, vn, pset=reuse, path_limit=path_limit)
        else:
            reuse_bisection = bisection
    return OracleReport(pset, diversity, node_simple, bisection, reuse_bisection)
