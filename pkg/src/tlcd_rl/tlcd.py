"""Temporal-logic causal diagrams: model, validation, LTLf description, causal DFA."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

from .automata import Alphabet, Dfa, compile_ltlf, minimize, product, universal
from .ltlf import (
    Formula, Globally, Implies, canonicalize, conjunction, parse_formula,
    timing_profile,
)


class InvalidDiagram(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


class TlcdSyntaxError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class CausalEdge:
    cause: Formula
    effect: Formula

    @property
    def sort_key(self) -> tuple[str, str]:
        return (str(self.cause), str(self.effect))

    def __str__(self):
        return f"{self.cause} => {self.effect}"


@dataclass(frozen=True)
class Violation:
    kind: str  # "cycle" or "timing"
    edge: CausalEdge | None
    message: str
    values: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class TlCd:
    """A causal diagram: directed links between LTLf formulas.

    ``raw`` holds extra LTLf conjuncts that are added verbatim to the
    description formula, for relations such as ``G((l -> c) & (c -> l))``
    that a DAG of links cannot express.
    """

    edges: frozenset[CausalEdge] = frozenset()
    raw: tuple[Formula, ...] = ()

    @classmethod
    def of(cls, *pairs: tuple[Formula, Formula], raw=()) -> "TlCd":
        return cls(frozenset(CausalEdge(c, e) for c, e in pairs), tuple(raw))

    @property
    def nodes(self) -> frozenset[Formula]:
        return frozenset(n for e in self.edges for n in (e.cause, e.effect))

    def sorted_edges(self) -> list[CausalEdge]:
        return sorted(self.edges, key=lambda e: e.sort_key)

    def with_edge(self, cause: Formula, effect: Formula) -> "TlCd":
        return TlCd(self.edges | {CausalEdge(cause, effect)}, self.raw)


def _find_cycle(d: TlCd) -> list[Formula] | None:
    succ: dict[Formula, list[Formula]] = {}
    for e in d.sorted_edges():
        succ.setdefault(canonicalize(e.cause), []).append(canonicalize(e.effect))
    white, grey, black = 0, 1, 2
    color: dict[Formula, int] = {}
    path: list[Formula] = []

    def visit(n) -> list[Formula] | None:
        color[n] = grey
        path.append(n)
        for m in succ.get(n, ()):
            c = color.get(m, white)
            if c == grey:
                return path[path.index(m):] + [m]
            if c == white:
                found = visit(m)
                if found:
                    return found
        path.pop()
        color[n] = black
        return None

    for n in sorted(succ, key=str):
        if color.get(n, white) == white:
            found = visit(n)
            if found:
                return found
    return None


def validate(d: TlCd) -> list[Violation]:
    """Acyclicity plus the cause-before-effect timing constraints on each edge."""
    violations = []
    cycle = _find_cycle(d)
    if cycle is not None:
        text = " => ".join(str(n) for n in cycle)
        violations.append(Violation("cycle", None, f"causal links form a cycle: {text}",
                                    {"cycle": cycle}))
    for e in d.sorted_edges():
        cause, effect = timing_profile(e.cause), timing_profile(e.effect)
        bound = min(effect.b_s, effect.b_v)
        for name, value in (("w_s", cause.w_s), ("w_v", cause.w_v)):
            if not value <= bound:
                violations.append(Violation(
                    "timing", e,
                    f"edge {e}: {name}(cause)={value} > min(b_s, b_v)(effect)={bound}",
                    {name: value, "b_s": effect.b_s, "b_v": effect.b_v},
                ))
    return violations


def _edge_formula(e: CausalEdge) -> Formula:
    return Globally(Implies(e.cause, e.effect))


def to_formula(d: TlCd, check: bool = True) -> Formula:
    """Conjunction of ``G(cause -> effect)`` over edges, in sorted edge order."""
    if check:
        violations = validate(d)
        if violations:
            raise InvalidDiagram(violations)
    return conjunction([_edge_formula(e) for e in d.sorted_edges()] + list(d.raw))


def to_causal_dfa(d: TlCd, alphabet: Alphabet, check: bool = True) -> Dfa:
    return compile_ltlf(to_formula(d, check), alphabet)


def to_causal_dfa_by_edges(d: TlCd, alphabet: Alphabet, check: bool = True) -> Dfa:
    """Same automaton built as the product of one DFA per conjunct."""
    if check:
        violations = validate(d)
        if violations:
            raise InvalidDiagram(violations)
    parts = [compile_ltlf(_edge_formula(e), alphabet) for e in d.sorted_edges()]
    parts += [compile_ltlf(f, alphabet) for f in d.raw]
    return minimize(reduce(product, parts, universal(alphabet)))


def parse_tlcd(text: str, alphabet=None) -> TlCd:
    """Read a diagram from the line format ``<cause> => <effect>``.

    ``raw: <formula>`` adds a verbatim conjunct, ``#`` starts a comment and
    blank lines are skipped.
    """
    if isinstance(alphabet, Alphabet):
        alphabet = alphabet.propositions
    edges = set()
    raw = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("raw:"):
            raw.append(parse_formula(line[4:], alphabet))
            continue
        if line.count("=>") != 1:
            raise TlcdSyntaxError(number, "expected '<cause> => <effect>'")
        left, right = line.split("=>")
        edges.add(CausalEdge(parse_formula(left, alphabet), parse_formula(right, alphabet)))
    return TlCd(frozenset(edges), tuple(raw))
