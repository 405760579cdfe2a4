"""LTLf syntax trees, a text parser, finite-trace semantics and timing analysis."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "Formula", "TrueF", "FalseF", "Atom", "Not", "And", "Or", "Implies",
    "Next", "Until", "Finally", "Globally", "TRUE", "FALSE",
    "FormulaSyntaxError", "UnknownProposition", "PositionOutOfRange",
    "UnsupportedConnective", "parse_formula", "evaluate", "satisfaction_table",
    "atoms", "desugar", "canonicalize", "conjunction", "INFINITY",
    "TimingProfile", "timing_profile", "subformulas",
]


class FormulaSyntaxError(ValueError):
    def __init__(self, text: str, position: int, expected: str):
        self.text = text
        self.position = position
        self.expected = expected
        super().__init__(f"at position {position}: expected {expected} in {text!r}")


class UnknownProposition(ValueError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown proposition {name!r}")


class PositionOutOfRange(IndexError):
    pass


class UnsupportedConnective(ValueError):
    pass


class Formula:
    """Base class of the LTLf syntax tree.

    Nodes are frozen dataclasses, so equality and hashing are structural.
    ``str()`` prints the formula in the ASCII grammar accepted by
    :func:`parse_formula` with the fewest parentheses that keep the tree.
    """

    __slots__ = ()

    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self) -> str:
        return _show(self, 0)

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)


@dataclass(frozen=True, repr=False)
class TrueF(Formula):
    def __repr__(self):
        return "TRUE"


@dataclass(frozen=True, repr=False)
class FalseF(Formula):
    def __repr__(self):
        return "FALSE"


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Finally(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Globally(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


# ---------------------------------------------------------------------------
# printing

_UNARY_SYMBOL = {Not: "!", Next: "X", Finally: "F", Globally: "G"}
_BINARY_SYMBOL = {Implies: "->", Or: "|", And: "&", Until: "U"}
# binding strength, loosest first
_LEVEL = {Implies: 1, Or: 2, And: 3, Until: 4}
_RIGHT_ASSOC = {Implies, Until}


def _show(f: Formula, context: int) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        return f.name
    kind = type(f)
    if kind in _UNARY_SYMBOL:
        sym = _UNARY_SYMBOL[kind]
        inner = _show(f.arg, 5)
        if sym == "!" or inner.startswith("("):
            return sym + inner
        return f"{sym} {inner}"
    level = _LEVEL[kind]
    if kind in _RIGHT_ASSOC:
        left, right = _show(f.left, level + 1), _show(f.right, level)
    else:
        left, right = _show(f.left, level), _show(f.right, level + 1)
    text = f"{left} {_BINARY_SYMBOL[kind]} {right}"
    return f"({text})" if level < context else text


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>->|→|[!¬&∧|∨()]))"
)
_KEYWORDS = {"X", "F", "G", "U", "true", "false"}
_ALIASES = {"¬": "!", "∧": "&", "∨": "|", "→": "->"}


class _Token(NamedTuple):
    kind: str  # "ident", "op" or "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(text, pos, "a proposition, constant or operator")
        start = m.start("ident") if m.group("ident") else m.start("op")
        if m.group("ident"):
            tokens.append(_Token("ident", m.group("ident"), start))
        else:
            op = m.group("op")
            tokens.append(_Token("op", _ALIASES.get(op, op), start))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: Iterable[str] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.alphabet = None if alphabet is None else set(alphabet)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def is_op(self, text: str) -> bool:
        t = self.tok
        return (t.kind == "op" or t.kind == "ident") and t.text == text

    def expect(self, text: str):
        if not self.is_op(text):
            raise FormulaSyntaxError(self.text, self.tok.pos, repr(text))
        self.i += 1

    def parse(self) -> Formula:
        f = self.implication()
        if self.tok.kind != "end":
            raise FormulaSyntaxError(self.text, self.tok.pos, "end of formula")
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.is_op("->"):
            self.i += 1
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.is_op("|"):
            self.i += 1
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.is_op("&"):
            self.i += 1
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.is_op("U"):
            self.i += 1
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        t = self.tok
        if t.kind == "op" and t.text == "!":
            self.i += 1
            return Not(self.unary())
        if t.kind == "ident" and t.text in ("X", "F", "G"):
            self.i += 1
            arg = self.unary()
            return {"X": Next, "F": Finally, "G": Globally}[t.text](arg)
        return self.primary()

    def primary(self) -> Formula:
        t = self.tok
        if t.kind == "op" and t.text == "(":
            self.i += 1
            f = self.implication()
            self.expect(")")
            return f
        if t.kind == "ident" and t.text not in _KEYWORDS:
            self.i += 1
            if self.alphabet is not None and t.text not in self.alphabet:
                raise UnknownProposition(t.text)
            return Atom(t.text)
        if t.kind == "ident" and t.text in ("true", "false"):
            self.i += 1
            return TRUE if t.text == "true" else FALSE
        raise FormulaSyntaxError(self.text, t.pos, "a proposition, constant, unary operator or '('")


def parse_formula(text: str, alphabet: Iterable[str] | None = None) -> Formula:
    """Parse ``text`` into a formula.

    Precedence from tightest: unary (``! X F G``), ``U``, ``&``, ``|``, ``->``.
    ``U`` and ``->`` associate to the right. When ``alphabet`` is given every
    atom must belong to it.
    """
    return _Parser(text, alphabet).parse()


# ---------------------------------------------------------------------------
# structure helpers

def subformulas(f: Formula) -> Iterator[Formula]:
    """Post-order traversal (children before parents), duplicates included."""
    stack: list[tuple[Formula, bool]] = [(f, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            yield node
        else:
            stack.append((node, True))
            for child in reversed(node.children()):
                stack.append((child, False))


def atoms(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in subformulas(f) if isinstance(g, Atom))


def conjunction(parts: Sequence[Formula]) -> Formula:
    """Left-nested conjunction; the empty conjunction is ``true``."""
    if not parts:
        return TRUE
    f = parts[0]
    for g in parts[1:]:
        f = And(f, g)
    return f


def desugar(f: Formula) -> Formula:
    """Rewrite into the core connectives {atom, !, |, X, U}; constants are kept."""
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.arg))
    if isinstance(f, Next):
        return Next(desugar(f.arg))
    if isinstance(f, Or):
        return Or(desugar(f.left), desugar(f.right))
    if isinstance(f, Until):
        return Until(desugar(f.left), desugar(f.right))
    if isinstance(f, And):
        return Not(Or(Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Implies):
        return Or(Not(desugar(f.left)), desugar(f.right))
    if isinstance(f, Finally):
        return Until(TRUE, desugar(f.arg))
    if isinstance(f, Globally):
        return Not(Until(TRUE, Not(desugar(f.arg))))
    raise TypeError(f"not a formula: {f!r}")


def _flatten(kind, f: Formula, out: list[Formula]):
    if isinstance(f, kind):
        _flatten(kind, f.left, out)
        _flatten(kind, f.right, out)
    else:
        out.append(f)


def _sort_key(f: Formula) -> tuple[str, str]:
    return (type(f).__name__, str(f))


def canonicalize(f: Formula) -> Formula:
    """Structural normal form used for node identity.

    Applies ``!!f -> f``, unit and zero laws for ``true``/``false``,
    flattening, duplicate removal and a fixed operand order for ``&`` and
    ``|``. The result is equivalent to ``f`` on every finite trace.
    """
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, Not):
        a = canonicalize(f.arg)
        if isinstance(a, Not):
            return a.arg
        if isinstance(a, TrueF):
            return FALSE
        if isinstance(a, FalseF):
            return TRUE
        return Not(a)
    if isinstance(f, (And, Or)):
        kind = type(f)
        unit, zero = (TRUE, FALSE) if kind is And else (FALSE, TRUE)
        flat: list[Formula] = []
        _flatten(kind, f, flat)
        parts = set()
        for g in flat:
            g = canonicalize(g)
            sub: list[Formula] = []
            _flatten(kind, g, sub)
            for h in sub:
                if h == zero:
                    return zero
                if h != unit:
                    parts.add(h)
        if not parts:
            return unit
        ordered = sorted(parts, key=_sort_key)
        out = ordered[0]
        for g in ordered[1:]:
            out = kind(out, g)
        return out
    if isinstance(f, Implies):
        return Implies(canonicalize(f.left), canonicalize(f.right))
    if isinstance(f, Until):
        return Until(canonicalize(f.left), canonicalize(f.right))
    return type(f)(canonicalize(f.arg))


# ---------------------------------------------------------------------------
# semantics

def evaluate(formula: Formula, trace: Sequence[Iterable[str]], position: int = 0) -> bool:
    """Truth of ``formula`` at ``position`` of a non-empty finite trace.

    Positions run over ``0 .. len(trace) - 1``. ``X f`` needs a successor
    position; the witness of ``U`` ranges up to the last position.
    """
    n = len(trace)
    if n == 0 or not 0 <= position < n:
        raise PositionOutOfRange(f"position {position} outside trace of length {n}")
    labels = [frozenset(letter) for letter in trace]
    memo: dict[tuple[Formula, int], bool] = {}

    def holds(f: Formula, i: int) -> bool:
        key = (f, i)
        if key in memo:
            return memo[key]
        if isinstance(f, TrueF):
            v = True
        elif isinstance(f, FalseF):
            v = False
        elif isinstance(f, Atom):
            v = f.name in labels[i]
        elif isinstance(f, Not):
            v = not holds(f.arg, i)
        elif isinstance(f, And):
            v = holds(f.left, i) and holds(f.right, i)
        elif isinstance(f, Or):
            v = holds(f.left, i) or holds(f.right, i)
        elif isinstance(f, Implies):
            v = (not holds(f.left, i)) or holds(f.right, i)
        elif isinstance(f, Next):
            v = i + 1 <= n - 1 and holds(f.arg, i + 1)
        elif isinstance(f, Until):
            v = False
            for j in range(i, n):
                if holds(f.right, j):
                    v = True
                    break
                if not holds(f.left, j):
                    break
        elif isinstance(f, Finally):
            v = any(holds(f.arg, j) for j in range(i, n))
        elif isinstance(f, Globally):
            v = all(holds(f.arg, j) for j in range(i, n))
        else:
            raise TypeError(f"not a formula: {f!r}")
        memo[key] = v
        return v

    return holds(formula, position)


def satisfaction_table(formula: Formula, propositions: Sequence[str], length: int) -> np.ndarray:
    """Truth at position 0 for every trace of exactly ``length`` letters.

    Traces are indexed in base ``2**len(propositions)`` with the first letter
    as the most significant digit; letter bit ``k`` stands for
    ``propositions[k]``. Every clause is applied position by position with
    explicit quantifiers, so this is a bulk form of :func:`evaluate`.
    """
    if length < 1:
        raise PositionOutOfRange("traces have at least one letter")
    k = len(propositions)
    index = {p: b for b, p in enumerate(propositions)}
    size = 2 ** k
    codes = np.arange(size ** length, dtype=np.int64)
    # letter_at[i] = letter code at position i for every trace
    letter_at = [(codes // size ** (length - 1 - i)) % size for i in range(length)]
    cache: dict[Formula, list[np.ndarray]] = {}

    def table(f: Formula) -> list[np.ndarray]:
        if f in cache:
            return cache[f]
        n = length
        if isinstance(f, TrueF):
            out = [np.ones(codes.shape, bool)] * n
        elif isinstance(f, FalseF):
            out = [np.zeros(codes.shape, bool)] * n
        elif isinstance(f, Atom):
            if f.name not in index:
                raise UnknownProposition(f.name)
            bit = index[f.name]
            out = [((letter_at[i] >> bit) & 1).astype(bool) for i in range(n)]
        elif isinstance(f, Not):
            out = [~v for v in table(f.arg)]
        elif isinstance(f, (And, Or, Implies)):
            a, b = table(f.left), table(f.right)
            if isinstance(f, And):
                out = [x & y for x, y in zip(a, b)]
            elif isinstance(f, Or):
                out = [x | y for x, y in zip(a, b)]
            else:
                out = [~x | y for x, y in zip(a, b)]
        elif isinstance(f, Next):
            a = table(f.arg)
            out = [a[i + 1] if i + 1 <= n - 1 else np.zeros(codes.shape, bool) for i in range(n)]
        elif isinstance(f, Until):
            a, b = table(f.left), table(f.right)
            out = []
            for i in range(n):
                acc = np.zeros(codes.shape, bool)
                prefix = np.ones(codes.shape, bool)
                for j in range(i, n):
                    acc |= b[j] & prefix
                    prefix = prefix & a[j]
                out.append(acc)
        elif isinstance(f, Finally):
            a = table(f.arg)
            out = [np.logical_or.reduce(a[i:]) for i in range(n)]
        elif isinstance(f, Globally):
            a = table(f.arg)
            out = [np.logical_and.reduce(a[i:]) for i in range(n)]
        else:
            raise TypeError(f"not a formula: {f!r}")
        cache[f] = out
        return out

    return table(formula)[0]


# ---------------------------------------------------------------------------
# timing analysis

INFINITY = math.inf
ExtendedTime = Union[int, float]


class TimingProfile(NamedTuple):
    """Best/worst-case satisfaction and violation times of a formula."""

    b_s: ExtendedTime
    w_s: ExtendedTime
    b_v: ExtendedTime
    w_v: ExtendedTime


def timing_profile(formula: Formula) -> TimingProfile:
    """Compute the four times by structural recursion.

    ``->`` is read as ``!a | b``. Constants have no rule and are rejected.
    """
    f = formula
    if isinstance(f, Atom):
        return TimingProfile(0, 0, 0, 0)
    if isinstance(f, Implies):
        return timing_profile(Or(Not(f.left), f.right))
    if isinstance(f, Not):
        t = timing_profile(f.arg)
        return TimingProfile(b_s=t.b_v, w_s=t.w_v, b_v=t.b_s, w_v=t.w_s)
    if isinstance(f, And):
        a, b = timing_profile(f.left), timing_profile(f.right)
        return TimingProfile(
            b_s=max(a.b_s, b.b_s),
            w_s=max(a.w_s, b.w_s),
            b_v=min(a.b_v, b.b_v),
            w_v=max(a.w_v, b.w_v),
        )
    if isinstance(f, Or):
        a, b = timing_profile(f.left), timing_profile(f.right)
        return TimingProfile(
            b_s=min(a.b_s, b.b_s),
            w_s=max(a.w_s, b.w_s),
            b_v=max(a.b_v, b.b_v),
            w_v=max(a.w_v, b.w_v),
        )
    if isinstance(f, Globally):
        t = timing_profile(f.arg)
        return TimingProfile(b_s=INFINITY, w_s=INFINITY, b_v=t.b_v, w_v=INFINITY)
    if isinstance(f, Finally):
        t = timing_profile(f.arg)
        return TimingProfile(b_s=t.b_s, w_s=INFINITY, b_v=INFINITY, w_v=INFINITY)
    if isinstance(f, Next):
        t = timing_profile(f.arg)
        return TimingProfile(t.b_s + 1, t.w_s + 1, t.b_v + 1, t.w_v + 1)
    if isinstance(f, Until):
        a, b = timing_profile(f.left), timing_profile(f.right)
        return TimingProfile(b_s=b.b_s, w_s=INFINITY, b_v=a.b_v, w_v=INFINITY)
    raise UnsupportedConnective(f"no timing rule for {type(f).__name__}")
