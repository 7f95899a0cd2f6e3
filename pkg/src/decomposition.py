"""
Per-symbol transition analysis.

Tests whether a symbol's transition relation is a Cartesian product of two
state sets, and otherwise partitions it into disjoint Cartesian-product blocks
(bicliques) so each block can be routed through aggregator states.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from src.config import get_logger, get_settings
from src.errors import UnknownSymbol
from src.graph_core import EPSILON
from src.policy_lang import PolicyNfa, normalize_terminals

logger = get_logger(__name__)

StatePair = Tuple[str, str]


class Minimality(str, Enum):
    GUARANTEED = "guaranteed"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class TransitionRelation:
    """
    The pairs (q1, q2) with a transition q1 -symbol-> q2.

    `states` fixes the canonical state order; when omitted it is the order in
    which states first appear in `pairs`. Pairs are stored deduplicated and
    sorted by that order.
    """
    symbol: str
    pairs: Tuple[StatePair, ...]
    states: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        states = list(self.states)
        seen = set(states)
        for q1, q2 in self.pairs:
            for q in (q1, q2):
                if q not in seen:
                    seen.add(q)
                    states.append(q)
        order = {q: i for i, q in enumerate(states)}
        pairs = sorted(set(self.pairs), key=lambda p: (order[p[0]], order[p[1]]))
        object.__setattr__(self, "states", tuple(states))
        object.__setattr__(self, "pairs", tuple(pairs))

    def order(self) -> Dict[str, int]:
        return {q: i for i, q in enumerate(self.states)}

    def domain(self) -> Tuple[str, ...]:
        present = {q1 for q1, _ in self.pairs}
        return tuple(q for q in self.states if q in present)

    def range(self) -> Tuple[str, ...]:
        present = {q2 for _, q2 in self.pairs}
        return tuple(q for q in self.states if q in present)


@dataclass(frozen=True)
class Block:
    """One Cartesian-product block sources × targets."""
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]

    def pairs(self) -> FrozenSet[StatePair]:
        return frozenset((a, b) for a in self.sources for b in self.targets)

    @property
    def kind(self) -> str:
        many_sources, many_targets = len(self.sources) > 1, len(self.targets) > 1
        if many_sources and many_targets:
            return "many-to-many"
        if many_sources:
            return "many-to-one"
        if many_targets:
            return "one-to-many"
        return "one-to-one"

    def to_text(self) -> str:
        return f"{{{','.join(self.sources)}}} x {{{','.join(self.targets)}}}"


@dataclass(frozen=True)
class TransitionDecomposition:
    symbol: str
    blocks: Tuple[Block, ...]
    minimality: Minimality

    @property
    def n_s(self) -> int:
        return len(self.blocks)

    @property
    def exact(self) -> bool:
        # An empty relation needs no block and adds no bound gap
        return self.n_s <= 1

    def to_dict(self) -> Dict:
        return {
            "symbol": self.symbol,
            "n_s": self.n_s,
            "exact": self.exact,
            "minimal": self.minimality.value,
            "blocks": [{"sources": list(b.sources), "targets": list(b.targets)} for b in self.blocks],
        }


def transitions_by_symbol(nfa: PolicyNfa, s: str) -> TransitionRelation:
    """Project the transition relation of nfa onto symbol s (which may be EPSILON)."""
    if s != EPSILON and s not in nfa.alphabet:
        raise UnknownSymbol(f"symbol {s!r} is not in the policy alphabet", symbol=s)
    pairs = tuple((q1, q2) for q1, symbol, q2 in nfa.transitions if symbol == s)
    return TransitionRelation(s, pairs, nfa.states)


def is_cartesian(rel: TransitionRelation) -> bool:
    """True iff the relation equals domain × range (vacuously true when empty)."""
    product = {(a, b) for a in rel.domain() for b in rel.range()}
    return product == set(rel.pairs)


def _greedy_blocks(rel: TransitionRelation) -> List[Block]:
    order = rel.order()
    remaining = set(rel.pairs)
    blocks = []
    while remaining:
        row, _ = min(remaining, key=lambda p: (order[p[0]], order[p[1]]))
        targets = sorted((b for a, b in remaining if a == row), key=order.__getitem__)
        sources = sorted(
            {a for a, _ in remaining if all((a, b) in remaining for b in targets)},
            key=order.__getitem__,
        )
        block = Block(tuple(sources), tuple(targets))
        remaining -= block.pairs()
        blocks.append(block)
    return blocks


def _subsets_containing(items: Sequence[int], required: int) -> List[Tuple[int, ...]]:
    """All subsets of items that contain `required`, largest first."""
    others = [x for x in items if x != required]
    subsets = []
    for mask in range(1 << len(others)):
        chosen = [others[i] for i in range(len(others)) if mask >> i & 1]
        subsets.append(tuple(sorted(chosen + [required])))
    subsets.sort(key=lambda s: (-len(s), s))
    return subsets


def _fooling_bound(live: Sequence[StatePair], live_set: FrozenSet[StatePair]) -> int:
    """Size of a greedy set of pairs no two of which fit in one block; a lower bound on the block count."""
    chosen: List[StatePair] = []
    for a, b in live:
        if all((a, d) not in live_set or (c, b) not in live_set for c, d in chosen):
            chosen.append((a, b))
    return len(chosen)


def _exact_blocks(rel: TransitionRelation) -> List[Block]:
    """
    Minimum partition into bicliques.

    Tries k blocks for k from a fooling-set bound up to one below the greedy
    cover's size; each depth is a search over remaining-pair bitmasks that
    remembers the largest k already shown infeasible for a mask. One block is
    a plain rectangle test.
    """
    greedy = _greedy_blocks(rel)
    order = rel.order()
    pairs = list(rel.pairs)
    index = {pair: i for i, pair in enumerate(pairs)}
    failed: Dict[int, int] = {}

    def encode(sources, targets) -> int:
        mask = 0
        for a in sources:
            for b in targets:
                mask |= 1 << index[(a, b)]
        return mask

    def search(remaining: int, k: int):
        if remaining == 0:
            return ()
        if k == 0 or failed.get(remaining, 0) >= k:
            return None
        live = [pairs[i] for i in range(len(pairs)) if remaining >> i & 1]

        if k == 1:
            sources = sorted({order[a] for a, _ in live})
            targets = sorted({order[b] for _, b in live})
            if len(sources) * len(targets) == len(live):
                return ((tuple(sources), tuple(targets)),)
            failed[remaining] = 1
            return None

        live_set = frozenset(live)
        if _fooling_bound(live, live_set) > k:
            failed[remaining] = k
            return None

        # Every partition has a block holding the lowest remaining pair
        lowest = (remaining & -remaining).bit_length() - 1
        row, column = pairs[lowest]
        row_targets = sorted({order[b] for a, b in live if a == row})
        for target_ids in _subsets_containing(row_targets, order[column]):
            targets = [rel.states[i] for i in target_ids]
            source_ids = sorted(
                {order[a] for a, _ in live if all((a, b) in live_set for b in targets)}
            )
            for chosen_ids in _subsets_containing(source_ids, order[row]):
                sources = [rel.states[i] for i in chosen_ids]
                rest = search(remaining & ~encode(sources, targets), k - 1)
                if rest is not None:
                    return ((tuple(chosen_ids), tuple(target_ids)),) + rest
        failed[remaining] = k
        return None

    full = (1 << len(pairs)) - 1
    for k in range(_fooling_bound(pairs, frozenset(pairs)), len(greedy)):
        chosen = search(full, k)
        if chosen is not None:
            return [
                Block(tuple(rel.states[i] for i in sources), tuple(rel.states[i] for i in targets))
                for sources, targets in chosen
            ]
    return greedy


def decompose(rel: TransitionRelation, exact_limit: Optional[int] = None) -> TransitionDecomposition:
    """
    Partition the relation into disjoint Cartesian-product blocks.

    Args:
        rel: Relation to decompose
        exact_limit: Relations with at most this many pairs get a minimum
            partition; larger ones use the greedy row-first cover.
            Defaults to the configured exact_decomposition_limit.

    Returns:
        Decomposition whose block products are disjoint and union to rel.pairs
    """
    limit = get_settings().exact_decomposition_limit if exact_limit is None else exact_limit

    if is_cartesian(rel):
        blocks = [Block(rel.domain(), rel.range())] if rel.pairs else []
        return TransitionDecomposition(rel.symbol, tuple(blocks), Minimality.GUARANTEED)

    if len(rel.pairs) <= limit:
        blocks = _exact_blocks(rel)
        minimality = Minimality.GUARANTEED
    else:
        blocks = _greedy_blocks(rel)
        minimality = Minimality.HEURISTIC
        logger.info("symbol %s: %d pairs above exact limit, greedy cover used", rel.symbol, len(rel.pairs))

    logger.debug("symbol %s decomposed into %d blocks", rel.symbol, len(blocks))
    return TransitionDecomposition(rel.symbol, tuple(blocks), minimality)


def decompose_all(nfa: PolicyNfa, exact_limit: Optional[int] = None) -> Dict[str, TransitionDecomposition]:
    """Decompose every alphabet symbol's relation, keyed in sorted symbol order."""
    return {
        symbol: decompose(transitions_by_symbol(nfa, symbol), exact_limit)
        for symbol in sorted(nfa.alphabet)
    }


@dataclass(frozen=True)
class ExactnessReport:
    policy: str
    decompositions: Dict[str, TransitionDecomposition]

    @property
    def exact(self) -> bool:
        return all(d.exact for d in self.decompositions.values())

    @property
    def n_s(self) -> Dict[str, int]:
        return {symbol: d.n_s for symbol, d in self.decompositions.items()}

    def to_dict(self) -> Dict:
        return {
            "policy": self.policy,
            "exact": self.exact,
            "n_s": self.n_s,
            "symbols": [d.to_dict() for d in self.decompositions.values()],
        }


def exactness_report(nfa: PolicyNfa, exact_limit: Optional[int] = None) -> ExactnessReport:
    """Check the Cartesian-product condition symbol by symbol on the single-terminal form of nfa."""
    return ExactnessReport(nfa.description, decompose_all(normalize_terminals(nfa), exact_limit))
