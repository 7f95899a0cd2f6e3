"""
Policy language: regular expressions over label tokens and the NFAs they compile to.

Tokens are whole labels such as `c2p` or `p2c:AS7018`; whitespace separates the
parts of a concatenation, `*`, `?` and `+` are postfix, `|` is alternation
(lowest precedence), and parentheses group.
"""

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from src.config import get_logger
from src.errors import (
    AlphabetMismatch,
    NoAcceptingState,
    ParseError,
    PolicyError,
    PolicySyntaxError,
    UnknownPreset,
    UnknownSymbol,
    UnknownToken,
)
from src.graph_core import EPSILON

logger = get_logger(__name__)

TOKEN_PATTERN = r"[A-Za-z0-9_.:-]+"
_LEXER = re.compile(rf"(?P<space>\s+)|(?P<token>{TOKEN_PATTERN})|(?P<op>[*?+|()])")

Transition = Tuple[str, str, str]


# Syntax tree

@dataclass(frozen=True)
class Symbol:
    name: str

    def to_text(self) -> str:
        return self.name


@dataclass(frozen=True)
class Concat:
    parts: Tuple["PolicyExpr", ...]

    def to_text(self) -> str:
        return " ".join(_wrap(part, Alt) for part in self.parts)


@dataclass(frozen=True)
class Alt:
    options: Tuple["PolicyExpr", ...]

    def to_text(self) -> str:
        return " | ".join(option.to_text() for option in self.options)


@dataclass(frozen=True)
class Star:
    inner: "PolicyExpr"

    def to_text(self) -> str:
        return _wrap(self.inner, (Alt, Concat)) + "*"


@dataclass(frozen=True)
class Opt:
    inner: "PolicyExpr"

    def to_text(self) -> str:
        return _wrap(self.inner, (Alt, Concat)) + "?"


@dataclass(frozen=True)
class Plus:
    inner: "PolicyExpr"

    def to_text(self) -> str:
        return _wrap(self.inner, (Alt, Concat)) + "+"


PolicyExpr = Union[Symbol, Concat, Alt, Star, Opt, Plus]


def _wrap(expr: PolicyExpr, kinds) -> str:
    text = expr.to_text()
    return f"({text})" if isinstance(expr, kinds) else text


class _Parser:
    """Recursive-descent parser over the lexed token stream."""

    def __init__(self, text: str, alphabet: FrozenSet[str]):
        self.text = text
        self.alphabet = alphabet
        self.tokens: List[Tuple[str, str, int]] = []
        position = 0
        while position < len(text):
            match = _LEXER.match(text, position)
            if match is None:
                raise PolicySyntaxError(f"unexpected character {text[position]!r}", position)
            if match.lastgroup != "space":
                self.tokens.append((match.lastgroup, match.group(), position))
            position = match.end()
        self.index = 0

    def peek(self) -> Optional[Tuple[str, str, int]]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def position(self) -> int:
        current = self.peek()
        return current[2] if current else len(self.text)

    def parse(self) -> PolicyExpr:
        if not self.tokens:
            raise PolicySyntaxError("empty policy", 0)
        expr = self.parse_alt()
        current = self.peek()
        if current is not None:
            raise PolicySyntaxError(f"unexpected {current[1]!r}", current[2])
        return expr

    def parse_alt(self) -> PolicyExpr:
        options = [self.parse_concat()]
        while self.peek() is not None and self.peek()[1] == "|":
            self.index += 1
            options.append(self.parse_concat())
        return options[0] if len(options) == 1 else Alt(tuple(options))

    def parse_concat(self) -> PolicyExpr:
        parts = []
        while True:
            current = self.peek()
            if current is None or not (current[0] == "token" or current[1] == "("):
                break
            parts.append(self.parse_postfix())
        if not parts:
            raise PolicySyntaxError("expected a label or '('", self.position())
        return parts[0] if len(parts) == 1 else Concat(tuple(parts))

    def parse_postfix(self) -> PolicyExpr:
        expr = self.parse_atom()
        while self.peek() is not None and self.peek()[1] in ("*", "?", "+"):
            op = self.peek()[1]
            self.index += 1
            expr = {"*": Star, "?": Opt, "+": Plus}[op](expr)
        return expr

    def parse_atom(self) -> PolicyExpr:
        kind, text, position = self.peek()
        self.index += 1
        if kind == "token":
            if text not in self.alphabet:
                raise UnknownToken(f"label {text!r} at position {position} is not in the alphabet",
                                   token=text, position=position)
            return Symbol(text)
        expr = self.parse_alt()
        closing = self.peek()
        if closing is None or closing[1] != ")":
            raise PolicySyntaxError("expected ')'", self.position())
        self.index += 1
        return expr


def parse_policy(text: str, alphabet: Iterable[str]) -> PolicyExpr:
    """Parse a policy regular expression whose leaf tokens must come from alphabet."""
    return _Parser(text, frozenset(alphabet)).parse()


# Automata

@dataclass(frozen=True)
class PolicyNfa:
    """
    NFA M = (Q, alphabet, transitions, start, accepting) with epsilon moves labeled EPSILON.

    States are kept in a canonical order (start first); transitions are
    deduplicated and keep their insertion order.
    """
    states: Tuple[str, ...]
    alphabet: FrozenSet[str]
    transitions: Tuple[Transition, ...]
    start: str
    accepting: FrozenSet[str]
    description: str = field(default="", compare=False)

    _moves: Dict[Tuple[str, str], Tuple[str, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        known = set(self.states)
        if len(known) != len(self.states):
            raise PolicyError("duplicate state names")
        if self.start not in known:
            raise PolicyError(f"start state {self.start!r} is not a state")
        if not self.accepting <= known:
            raise PolicyError("accepting states must be states")
        if EPSILON in self.alphabet:
            raise PolicyError(f"{EPSILON!r} cannot be an alphabet symbol")

        unique: Dict[Transition, None] = {}
        moves: Dict[Tuple[str, str], List[str]] = {}
        for q1, symbol, q2 in self.transitions:
            if q1 not in known or q2 not in known:
                raise PolicyError(f"transition {q1} {symbol} {q2} uses an unknown state")
            if symbol != EPSILON and symbol not in self.alphabet:
                raise UnknownSymbol(f"transition symbol {symbol!r} is not in the alphabet", symbol=symbol)
            if (q1, symbol, q2) not in unique:
                unique[(q1, symbol, q2)] = None
                moves.setdefault((q1, symbol), []).append(q2)
        object.__setattr__(self, "transitions", tuple(unique))
        object.__setattr__(self, "_moves", {key: tuple(targets) for key, targets in moves.items()})

    @property
    def epsilon_transitions(self) -> Tuple[Tuple[str, str], ...]:
        return tuple((q1, q2) for q1, symbol, q2 in self.transitions if symbol == EPSILON)

    def successors(self, state: str, symbol: str) -> Tuple[str, ...]:
        return self._moves.get((state, symbol), ())

    def epsilon_closure(self, states: Iterable[str]) -> FrozenSet[str]:
        seen = set(states)
        stack = list(seen)
        while stack:
            for target in self.successors(stack.pop(), EPSILON):
                if target not in seen:
                    seen.add(target)
                    stack.append(target)
        return frozenset(seen)

    def step(self, states: Iterable[str], symbol: str) -> FrozenSet[str]:
        targets = [t for q in states for t in self.successors(q, symbol)]
        return self.epsilon_closure(targets)

    def accepts(self, word: Sequence[str]) -> bool:
        current = self.epsilon_closure([self.start])
        for symbol in word:
            current = self.step(current, symbol)
            if not current:
                return False
        return bool(current & self.accepting)

    def state_index(self) -> Dict[str, int]:
        return {state: index for index, state in enumerate(self.states)}


def _fresh_state(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    name = base
    while name in taken:
        name += "'"
    return name


def _canonical(
    start: int,
    transitions: List[Tuple[int, str, int]],
    accepting: Iterable[int],
    alphabet: FrozenSet[str],
    description: str,
) -> PolicyNfa:
    """Rename integer states q0, q1, ... in breadth-first order from the start state."""
    outgoing: Dict[int, List[Tuple[str, int]]] = {}
    for q1, symbol, q2 in transitions:
        outgoing.setdefault(q1, []).append((symbol, q2))

    names: Dict[int, str] = {start: "q0"}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        for _, target in outgoing.get(state, ()):
            if target not in names:
                names[target] = f"q{len(names)}"
                queue.append(target)

    return PolicyNfa(
        states=tuple(names.values()),
        alphabet=alphabet,
        transitions=tuple(
            (names[q1], symbol, names[q2]) for q1, symbol, q2 in transitions if q1 in names
        ),
        start="q0",
        accepting=frozenset(names[q] for q in accepting if q in names),
        description=description,
    )


class _ThompsonBuilder:
    def __init__(self):
        self.count = 0
        self.transitions: List[Tuple[int, str, int]] = []

    def new_state(self) -> int:
        self.count += 1
        return self.count - 1

    def link(self, q1: int, symbol: str, q2: int) -> None:
        self.transitions.append((q1, symbol, q2))

    def build(self, expr: PolicyExpr) -> Tuple[int, int]:
        if isinstance(expr, Symbol):
            start, accept = self.new_state(), self.new_state()
            self.link(start, expr.name, accept)
            return start, accept

        if isinstance(expr, Concat):
            fragments = [self.build(part) for part in expr.parts]
            for (_, left_accept), (right_start, _) in zip(fragments, fragments[1:]):
                self.link(left_accept, EPSILON, right_start)
            return fragments[0][0], fragments[-1][1]

        if isinstance(expr, Alt):
            start = self.new_state()
            fragments = [self.build(option) for option in expr.options]
            accept = self.new_state()
            for inner_start, inner_accept in fragments:
                self.link(start, EPSILON, inner_start)
                self.link(inner_accept, EPSILON, accept)
            return start, accept

        start = self.new_state()
        inner_start, inner_accept = self.build(expr.inner)
        accept = self.new_state()
        self.link(start, EPSILON, inner_start)
        if isinstance(expr, (Star, Opt)):
            self.link(start, EPSILON, accept)
        if isinstance(expr, (Star, Plus)):
            self.link(inner_accept, EPSILON, inner_start)
        self.link(inner_accept, EPSILON, accept)
        return start, accept


def compile_nfa(expr: PolicyExpr, alphabet: Optional[Iterable[str]] = None) -> PolicyNfa:
    """
    Thompson construction with epsilon moves.

    The alphabet defaults to the symbols used in expr; pass the declared
    alphabet to keep unused symbols in it.
    """
    builder = _ThompsonBuilder()
    start, accept = builder.build(expr)
    sigma = frozenset(alphabet) if alphabet is not None else frozenset(
        symbol for _, symbol, _ in builder.transitions if symbol != EPSILON
    )
    return _canonical(start, builder.transitions, [accept], sigma, expr.to_text())


def compile_policy(text: str, alphabet: Iterable[str]) -> PolicyNfa:
    """parse_policy followed by compile_nfa over the same alphabet."""
    sigma = frozenset(alphabet)
    return compile_nfa(parse_policy(text, sigma), sigma)


def normalize_terminals(nfa: PolicyNfa) -> PolicyNfa:
    """
    Give the NFA a single accepting state.

    With more than one accepting state a new state q* is added, every
    transition into an accepting state is copied to end in q*, and q* becomes
    the only accepting state. An accepting start state also gets an epsilon
    move to q* so the empty word stays accepted.
    """
    if not nfa.accepting:
        raise NoAcceptingState("the policy automaton has no accepting state")
    if len(nfa.accepting) == 1:
        return nfa

    terminal = _fresh_state("q*", nfa.states)
    copied = [(q1, symbol, terminal) for q1, symbol, q2 in nfa.transitions if q2 in nfa.accepting]
    if nfa.start in nfa.accepting:
        copied.append((nfa.start, EPSILON, terminal))
    logger.debug("normalize_terminals: merged %d accepting states into %s", len(nfa.accepting), terminal)
    return PolicyNfa(
        states=nfa.states + (terminal,),
        alphabet=nfa.alphabet,
        transitions=nfa.transitions + tuple(copied),
        start=nfa.start,
        accepting=frozenset([terminal]),
        description=nfa.description,
    )


def eliminate_epsilon(nfa: PolicyNfa) -> PolicyNfa:
    """Equivalent NFA without epsilon moves, restricted to states reachable from the start."""
    order = nfa.state_index()
    symbols = sorted(nfa.alphabet)
    closures = {state: nfa.epsilon_closure([state]) for state in nfa.states}

    transitions: List[Transition] = []
    for state in nfa.states:
        for symbol in symbols:
            targets = nfa.step(closures[state], symbol)
            for target in sorted(targets, key=order.__getitem__):
                transitions.append((state, symbol, target))
    accepting = [state for state in nfa.states if closures[state] & nfa.accepting]

    index = {state: i for i, state in enumerate(nfa.states)}
    return _canonical(
        index[nfa.start],
        [(index[a], symbol, index[b]) for a, symbol, b in transitions],
        [index[state] for state in accepting],
        nfa.alphabet,
        nfa.description,
    )


def intersect(a: PolicyNfa, b: PolicyNfa) -> PolicyNfa:
    """Product automaton of the epsilon-free forms of a and b; accepts L(a) ∩ L(b)."""
    if a.alphabet != b.alphabet:
        raise AlphabetMismatch(
            "intersected policies must share an alphabet",
            left=" ".join(sorted(a.alphabet)),
            right=" ".join(sorted(b.alphabet)),
        )
    left, right = eliminate_epsilon(a), eliminate_epsilon(b)
    symbols = sorted(a.alphabet)

    ids: Dict[Tuple[str, str], int] = {(left.start, right.start): 0}
    queue = deque([(left.start, right.start)])
    transitions: List[Tuple[int, str, int]] = []
    while queue:
        pair = queue.popleft()
        for symbol in symbols:
            for target_left in left.successors(pair[0], symbol):
                for target_right in right.successors(pair[1], symbol):
                    target = (target_left, target_right)
                    if target not in ids:
                        ids[target] = len(ids)
                        queue.append(target)
                    transitions.append((ids[pair], symbol, ids[target]))

    accepting = [i for (p, q), i in ids.items() if p in left.accepting and q in right.accepting]
    description = f"({a.description}) & ({b.description})"
    return _canonical(0, transitions, accepting, a.alphabet, description)


# Presets and policy builders

VALLEY_FREE_ALPHABET = frozenset({"c2p", "p2p", "p2c"})

PRESETS: Dict[str, str] = {
    "valley-free": "c2p* p2p? p2c*",
    "multiple-peering-links": "c2p* p2p* p2c*",
    "any": "(c2p | p2p | p2c)*",
}


def preset(name: str) -> Tuple[FrozenSet[str], PolicyNfa]:
    """Named inter-domain policies over the {c2p, p2p, p2c} alphabet."""
    if name not in PRESETS:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", preset=name)
    return VALLEY_FREE_ALPHABET, compile_policy(PRESETS[name], VALLEY_FREE_ALPHABET)


def _choice(symbols: Iterable[str]) -> str:
    return "(" + " | ".join(sorted(symbols)) + ")"


def waypoint_policy(
    alphabet: Iterable[str],
    waypoints: Iterable[str],
    avoid_before: Iterable[str] = (),
) -> PolicyNfa:
    """
    Paths that take at least one waypoint label.

    Labels in avoid_before may only appear after the first waypoint label
    (negative waypoint routing).
    """
    sigma = frozenset(alphabet)
    marks, avoided = frozenset(waypoints), frozenset(avoid_before)
    for symbol in marks | avoided:
        if symbol not in sigma:
            raise UnknownSymbol(f"label {symbol!r} is not in the alphabet", symbol=symbol)
    if not marks:
        raise PolicyError("a waypoint policy needs at least one waypoint label")

    allowed_before = sigma - avoided - marks
    prefix = f"{_choice(allowed_before)}* " if allowed_before else ""
    text = f"{prefix}{_choice(marks)} {_choice(sigma)}*"
    return compile_policy(text, sigma)


def avoid_policy(alphabet: Iterable[str], forbidden: Iterable[str]) -> PolicyNfa:
    """Paths that never take a forbidden label."""
    sigma = frozenset(alphabet)
    allowed = sigma - frozenset(forbidden)
    if not allowed:
        return PolicyNfa(("q0",), sigma, (), "q0", frozenset(["q0"]), description="()")
    return compile_policy(f"{_choice(allowed)}*", sigma)


def tuple_alphabet(base: Iterable[str], tags: Iterable[str]) -> FrozenSet[str]:
    tags = list(tags)
    return frozenset(f"{symbol}:{tag}" for symbol in base for tag in tags)


def expand_over_tuples(nfa: PolicyNfa, tags: Iterable[str]) -> PolicyNfa:
    """Rewrite each base-symbol transition into one transition per tuple token `symbol:tag`."""
    tags = sorted(set(tags))
    transitions: List[Transition] = []
    for q1, symbol, q2 in nfa.transitions:
        if symbol == EPSILON:
            transitions.append((q1, symbol, q2))
        else:
            transitions.extend((q1, f"{symbol}:{tag}", q2) for tag in tags)
    return PolicyNfa(
        states=nfa.states,
        alphabet=tuple_alphabet(nfa.alphabet, tags),
        transitions=tuple(transitions),
        start=nfa.start,
        accepting=nfa.accepting,
        description=f"{nfa.description} over tuple labels",
    )


# Text format

def parse_nfa_text(text: str, alphabet: Optional[Iterable[str]] = None) -> PolicyNfa:
    """
    Parse the NFA text format.

    Header lines `start: q0`, `accept: q1 q2` and optionally `alphabet: a b`,
    then one `q1 <symbol>|eps q2` transition per line; '#' starts a comment.
    """
    start: Optional[str] = None
    accepting: List[str] = []
    declared = set(alphabet) if alphabet is not None else None
    transitions: List[Transition] = []
    states: Dict[str, None] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key = key.strip().lower()
        if key == "start" and rest.strip():
            start = rest.strip()
            continue
        if key == "accept":
            accepting = rest.split()
            continue
        if key == "alphabet":
            if declared is None:
                declared = set(rest.split())
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, "expected 'state symbol state'")
        q1, symbol, q2 = parts
        states.setdefault(q1, None)
        states.setdefault(q2, None)
        transitions.append((q1, symbol, q2))

    if start is None:
        raise ParseError(0, "missing 'start:' header")
    ordered = [start] + [s for s in list(states) + accepting if s != start]
    ordered = list(dict.fromkeys(ordered))
    sigma = declared if declared is not None else {s for _, s, _ in transitions if s != EPSILON}
    return PolicyNfa(
        states=tuple(ordered),
        alphabet=frozenset(sigma),
        transitions=tuple(transitions),
        start=start,
        accepting=frozenset(accepting),
        description="nfa",
    )


def load_nfa(path: Union[str, Path], alphabet: Optional[Iterable[str]] = None) -> PolicyNfa:
    nfa = parse_nfa_text(Path(path).read_text(encoding="utf-8"), alphabet)
    object.__setattr__(nfa, "description", f"nfa:{Path(path).name}")
    return nfa


def dump_nfa(nfa: PolicyNfa) -> str:
    lines = [
        f"alphabet: {' '.join(sorted(nfa.alphabet))}",
        f"start: {nfa.start}",
        f"accept: {' '.join(s for s in nfa.states if s in nfa.accepting)}",
    ]
    lines.extend(f"{q1} {symbol} {q2}" for q1, symbol, q2 in nfa.transitions)
    return "\n".join(lines) + "\n"
