"""
Loaders for inter-domain topology data.

CAIDA AS relationship files become labeled graphs; PeeringDB member exports
(`asn,policy`) augment them with peering links; address-count tables
(`asn,address_count`, or raw RouteViews pfx2as) drive weighted AS sampling;
customer cones come from the p2c subgraph.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from src.config import get_logger
from src.errors import ConflictingRelationship, InsufficientSupport, ParseError
from src.graph_core import EdgeSpec, LabeledDigraph, build_graph
from src.policy_lang import VALLEY_FREE_ALPHABET, tuple_alphabet

logger = get_logger(__name__)

P2C = "p2c"
C2P = "c2p"
P2P = "p2p"

PEERING_POLICIES = ("open", "selective", "restrictive")

_AS_REL_LINE = re.compile(r"^\s*(\d+)\s*\|\s*(\d+)\s*\|\s*(-?\d+)\s*(?:\|\s*([^|]*?)\s*)?$")
_RELATIONSHIPS = {"-1": P2C, "0": P2P}


@dataclass(frozen=True)
class AsRelationship:
    """`as_a` is the provider for p2c records."""
    as_a: int
    as_b: int
    rel: str


@dataclass(frozen=True)
class AsRelationshipSet:
    records: Tuple[AsRelationship, ...]
    source: str = ""
    metadata: Dict[str, str] = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.records)


def parse_as_rel_text(text: str, source: str = "") -> AsRelationshipSet:
    """
    Parse `<as_a>|<as_b>|<rel>[|<source>]` lines (rel -1: a is provider of b, 0: peers).

    Identical duplicates are dropped; the same AS pair with a different
    relationship or orientation raises ConflictingRelationship.
    """
    records: List[AsRelationship] = []
    seen: Dict[frozenset, AsRelationship] = {}
    metadata: Dict[str, str] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep and key.strip() and " " not in key.strip():
                metadata[key.strip().lower()] = value.strip()
            continue

        match = _AS_REL_LINE.match(line)
        if match is None:
            raise ParseError(lineno, "expected <as_a>|<as_b>|<rel>")
        as_a, as_b, code = int(match.group(1)), int(match.group(2)), match.group(3)
        if code not in _RELATIONSHIPS:
            raise ParseError(lineno, f"unknown relationship code {code}")
        if as_a <= 0 or as_b <= 0:
            raise ParseError(lineno, "AS numbers must be positive")
        if as_a == as_b:
            raise ParseError(lineno, f"AS{as_a} cannot have a relationship with itself")

        rel = _RELATIONSHIPS[code]
        if rel == P2P:
            as_a, as_b = min(as_a, as_b), max(as_a, as_b)
        record = AsRelationship(as_a, as_b, rel)

        key = frozenset((as_a, as_b))
        previous = seen.get(key)
        if previous is not None:
            if previous != record:
                raise ConflictingRelationship(
                    f"line {lineno}: AS{as_a}-AS{as_b} already recorded as "
                    f"{previous.as_a}|{previous.as_b}|{previous.rel}",
                    line=lineno,
                )
            continue
        seen[key] = record
        records.append(record)

    return AsRelationshipSet(tuple(records), source or metadata.get("source", ""), metadata)


def parse_as_rel(path: Union[str, Path]) -> AsRelationshipSet:
    """Load a CAIDA AS relationship file."""
    rels = parse_as_rel_text(Path(path).read_text(encoding="utf-8"), source=str(path))
    logger.info("loaded %d AS relationships from %s", len(rels), path)
    return rels


def to_labeled_graph(rels: AsRelationshipSet) -> LabeledDigraph:
    """Two directed unit-capacity edges per record: p2c/c2p for transit, p2p both ways for peers."""
    edges: List[EdgeSpec] = []
    for r in rels.records:
        a, b = str(r.as_a), str(r.as_b)
        if r.rel == P2C:
            edges.append((a, b, P2C, 1))
            edges.append((b, a, C2P, 1))
        else:
            edges.append((a, b, P2P, 1))
            edges.append((b, a, P2P, 1))
    return build_graph(VALLEY_FREE_ALPHABET, edges)


# PeeringDB members

@dataclass(frozen=True)
class PeeringMember:
    asn: str
    policy: str


def load_peering_members(path: Union[str, Path]) -> List[PeeringMember]:
    """Read an `asn,policy` CSV export; policies are open, selective or restrictive."""
    frame = pd.read_csv(path, dtype=str, comment="#", skipinitialspace=True)
    missing = {"asn", "policy"} - set(frame.columns)
    if missing:
        raise ParseError(1, f"missing column(s): {', '.join(sorted(missing))}")

    members = []
    for row, (asn, policy) in enumerate(zip(frame["asn"], frame["policy"]), start=2):
        asn, policy = str(asn).strip().upper().removeprefix("AS"), str(policy).strip().lower()
        if not asn.isdigit():
            raise ParseError(row, f"invalid AS number {asn!r}")
        if policy not in PEERING_POLICIES:
            raise ParseError(row, f"unknown peering policy {policy!r}")
        members.append(PeeringMember(str(int(asn)), policy))
    logger.info("loaded %d peering members from %s", len(members), path)
    return members


def augment_peering(g: LabeledDigraph, members: Sequence[PeeringMember], mode: str) -> LabeledDigraph:
    """
    Add p2p links in both directions between every pair of `mode` members with no existing link.

    Existing relationships are never duplicated or overwritten; members not yet
    in the graph become new nodes.
    """
    if mode not in PEERING_POLICIES:
        raise ParseError(0, f"unknown peering policy class {mode!r}")
    selected = sorted({m.asn for m in members if m.policy == mode}, key=lambda asn: int(asn))

    linked = {frozenset((e.src, e.dst)) for e in g.edges}
    added: List[EdgeSpec] = []
    for i, a in enumerate(selected):
        for b in selected[i + 1:]:
            if frozenset((a, b)) in linked:
                continue
            added.append((a, b, P2P, 1))
            added.append((b, a, P2P, 1))
    if not added:
        return g

    existing = [(e.src, e.dst, e.label, e.capacity) for e in g.edges]
    logger.info("augmenting with %d %s peering links", len(added) // 2, mode)
    return build_graph(g.alphabet | {P2P}, existing + added, nodes=g.nodes)


def depeer(g: LabeledDigraph, isp_a: Union[str, Iterable[str]], isp_b: Union[str, Iterable[str]]) -> LabeledDigraph:
    """Remove every p2p edge between the two ISPs (each a single AS or a set of sibling ASes)."""
    side_a = {isp_a} if isinstance(isp_a, str) else set(isp_a)
    side_b = {isp_b} if isinstance(isp_b, str) else set(isp_b)
    for node in side_a | side_b:
        g.require_node(node)

    def between(e) -> bool:
        return e.label == P2P and (
            (e.src in side_a and e.dst in side_b) or (e.src in side_b and e.dst in side_a)
        )

    removed = sum(1 for e in g.edges if between(e))
    logger.info("depeering removed %d p2p edges", removed)
    return g.remove_edges(between)


def with_next_hop_labels(g: LabeledDigraph) -> LabeledDigraph:
    """Relabel each edge `label:dst` so policies can name next hops."""
    edges = [(e.src, e.dst, f"{e.label}:{e.dst}", e.capacity) for e in g.edges]
    return build_graph(tuple_alphabet(g.alphabet, g.nodes), edges, nodes=g.nodes)


# Address weights and sampling

@dataclass(frozen=True)
class WeightTable:
    """AS -> announced address count."""
    weights: Dict[str, int]

    def positive(self) -> Dict[str, int]:
        return {asn: w for asn, w in self.weights.items() if w > 0}

    def restricted_to(self, nodes: Iterable[str]) -> "WeightTable":
        keep = set(nodes)
        return WeightTable({asn: w for asn, w in self.weights.items() if asn in keep})


def load_weights(path: Union[str, Path]) -> WeightTable:
    """Read an `asn,address_count` CSV."""
    frame = pd.read_csv(path, dtype={"asn": str}, comment="#", skipinitialspace=True)
    missing = {"asn", "address_count"} - set(frame.columns)
    if missing:
        raise ParseError(1, f"missing column(s): {', '.join(sorted(missing))}")
    weights: Dict[str, int] = {}
    for row, (asn, count) in enumerate(zip(frame["asn"], frame["address_count"]), start=2):
        if pd.isna(count) or int(count) < 0:
            raise ParseError(row, "address_count must be a nonnegative integer")
        key = str(int(str(asn).strip().upper().removeprefix("AS")))
        weights[key] = weights.get(key, 0) + int(count)
    return WeightTable(weights)


def aggregate_pfx2as(path: Union[str, Path]) -> WeightTable:
    """
    Build a weight table from a RouteViews pfx2as file (`prefix<TAB>length<TAB>origins`).

    Each IPv4 prefix credits 2^(32 - length) addresses to every origin AS;
    multi-origin entries separate ASes with `_` and AS sets with `,`.
    """
    frame = pd.read_csv(path, sep="\t", header=None, names=["prefix", "length", "origins"], dtype=str)
    weights: Dict[str, int] = {}
    for prefix, length, origins in frame.itertuples(index=False):
        if ":" in str(prefix) or not str(length).isdigit() or int(length) > 32:
            continue
        addresses = 2 ** (32 - int(length))
        for asn in re.split(r"[_,]", str(origins)):
            if asn.strip().isdigit():
                weights[asn.strip()] = weights.get(asn.strip(), 0) + addresses
    logger.info("aggregated %d prefixes into %d AS weights", len(frame), len(weights))
    return WeightTable(weights)


def weighted_sample_pairs(weights: WeightTable, n: int, seed: int) -> List[Tuple[str, str]]:
    """
    Draw n ordered AS pairs, each endpoint with probability proportional to its weight.

    The second endpoint is redrawn while it equals the first.
    """
    support = weights.positive()
    if len(support) < 2:
        raise InsufficientSupport(
            f"need at least two ASes with positive weight, found {len(support)}", support=len(support)
        )
    names = list(support)
    p = np.array([support[name] for name in names], dtype=float)
    p /= p.sum()

    rng = np.random.default_rng(seed)
    first = rng.choice(len(names), size=n, p=p)
    second = rng.choice(len(names), size=n, p=p)
    clash = first == second
    while clash.any():
        second[clash] = rng.choice(len(names), size=int(clash.sum()), p=p)
        clash = first == second
    return [(names[a], names[b]) for a, b in zip(first.tolist(), second.tolist())]


# Customer cones

def p2c_digraph(g: LabeledDigraph) -> nx.DiGraph:
    transit = nx.DiGraph()
    transit.add_nodes_from(g.nodes)
    transit.add_edges_from((e.src, e.dst) for e in g.edges if e.label == P2C)
    return transit


def customer_cone(g: LabeledDigraph, asn: str, depth: int, transit: Optional[nx.DiGraph] = None) -> Set[str]:
    """ASes reachable from asn over at most `depth` consecutive p2c edges, asn itself excluded."""
    g.require_node(asn)
    transit = p2c_digraph(g) if transit is None else transit
    reached = nx.single_source_shortest_path_length(transit, asn, cutoff=depth)
    return set(reached) - {asn}


def exclusive_customer_cone(g: LabeledDigraph, asn: str, other: Iterable[str], depth: int) -> Set[str]:
    """Customer cone of asn minus the cones of (and the ASes in) `other`."""
    transit = p2c_digraph(g)
    cone = customer_cone(g, asn, depth, transit)
    for rival in other:
        cone -= customer_cone(g, rival, depth, transit) | {rival}
    return cone
