"""Finite automata over the alphabet of proposition subsets.

Letters are bitmasks over an ordered proposition tuple: bit ``k`` of a letter
is set when ``alphabet.propositions[k]`` holds. Automata are immutable and
hashable so they can key caches.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .ltlf import (
    FALSE, TRUE, And, Atom, FalseF, Finally, Formula, Globally, Implies, Next,
    Not, Or, TrueF, Until, atoms, evaluate, parse_formula, subformulas,
)

MAX_PROPOSITIONS = 16
MAX_STATES = 10_000
MAX_TEMPORAL_TERMS = 22


class AlphabetTooLarge(ValueError):
    pass


class AlphabetMismatch(ValueError):
    pass


class StateBlowup(RuntimeError):
    pass


@dataclass(frozen=True)
class Alphabet:
    propositions: tuple[str, ...]

    def __post_init__(self):
        props = tuple(self.propositions)
        object.__setattr__(self, "propositions", props)
        if len(set(props)) != len(props):
            raise ValueError(f"duplicate propositions in {props}")
        if len(props) > MAX_PROPOSITIONS:
            raise AlphabetTooLarge(f"{len(props)} propositions (limit {MAX_PROPOSITIONS})")

    @classmethod
    def of(cls, *names: str) -> "Alphabet":
        return cls(tuple(names))

    @property
    def size(self) -> int:
        return 1 << len(self.propositions)

    def letters(self) -> range:
        return range(self.size)

    def encode(self, labels: Iterable[str]) -> int:
        letter = 0
        for name in labels:
            try:
                letter |= 1 << self.propositions.index(name)
            except ValueError:
                raise AlphabetMismatch(f"{name!r} is not in {self.propositions}") from None
        return letter

    def decode(self, letter: int) -> frozenset[str]:
        return frozenset(p for k, p in enumerate(self.propositions) if letter >> k & 1)

    def __contains__(self, name: str) -> bool:
        return name in self.propositions

    def __len__(self) -> int:
        return len(self.propositions)

    def __iter__(self):
        return iter(self.propositions)


Word = Sequence[Union[int, Iterable[str]]]


def _letters(alphabet: Alphabet, word: Word) -> list[int]:
    return [x if isinstance(x, int) else alphabet.encode(x) for x in word]


@dataclass(frozen=True)
class Run:
    states: tuple[int, ...]
    word: tuple[int, ...]

    @property
    def last(self) -> int:
        return self.states[-1]


@dataclass(frozen=True)
class Dfa:
    """Complete DFA; ``delta[state][letter]`` is the successor state."""

    alphabet: Alphabet
    delta: tuple[tuple[int, ...], ...]
    initial: int
    finals: frozenset[int]
    names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        n = len(self.delta)
        if not 0 <= self.initial < n:
            raise ValueError("initial state out of range")
        for row in self.delta:
            if len(row) != self.alphabet.size or any(not 0 <= t < n for t in row):
                raise ValueError("transition function must be total over the alphabet")
        if any(not 0 <= f < n for f in self.finals):
            raise ValueError("final state out of range")

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def __len__(self) -> int:
        return len(self.delta)

    def step(self, state: int, letter: int) -> int:
        return self.delta[state][letter]

    def run(self, word: Word, start: int | None = None) -> Run:
        letters = _letters(self.alphabet, word)
        q = self.initial if start is None else start
        states = [q]
        for letter in letters:
            q = self.delta[q][letter]
            states.append(q)
        return Run(tuple(states), tuple(letters))

    def accepts(self, word: Word, start: int | None = None) -> bool:
        return self.run(word, start).last in self.finals

    def with_initial(self, state: int) -> "Dfa":
        return Dfa(self.alphabet, self.delta, state, self.finals, self.names)

    def reachable(self, start: int | None = None) -> list[int]:
        start = self.initial if start is None else start
        seen = {start}
        order = [start]
        queue = deque([start])
        while queue:
            q = queue.popleft()
            for t in self.delta[q]:
                if t not in seen:
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
        return order


@dataclass(frozen=True)
class Nfa:
    alphabet: Alphabet
    delta: tuple[tuple[frozenset[int], ...], ...]
    initial: int
    finals: frozenset[int]

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def successors(self, state: int, letter: int) -> frozenset[int]:
        return self.delta[state][letter]

    def accepts(self, word: Word) -> bool:
        current = {self.initial}
        for letter in _letters(self.alphabet, word):
            current = {t for q in current for t in self.delta[q][letter]}
        return bool(current & self.finals)


def accepts(a: Dfa, w: Word) -> bool:
    return a.accepts(w)


def universal(alphabet: Alphabet) -> Dfa:
    return Dfa(alphabet, (tuple([0] * alphabet.size),), 0, frozenset({0}))


def empty_language(alphabet: Alphabet) -> Dfa:
    return Dfa(alphabet, (tuple([0] * alphabet.size),), 0, frozenset())


def complement(a: Dfa) -> Dfa:
    return Dfa(a.alphabet, a.delta, a.initial, frozenset(range(a.n_states)) - a.finals)


def _renumber(alphabet: Alphabet, delta: Sequence[Sequence[int]], initial: int,
              finals: Iterable[int], names: Sequence[str] | None = None) -> Dfa:
    """Keep reachable states, numbered in breadth-first order by letter."""
    order = {initial: 0}
    queue = deque([initial])
    while queue:
        q = queue.popleft()
        for t in delta[q]:
            if t not in order:
                order[t] = len(order)
                queue.append(t)
    new_delta = [None] * len(order)
    for q, i in order.items():
        new_delta[i] = tuple(order[t] for t in delta[q])
    finals = set(finals)
    new_names = None
    if names is not None:
        new_names = tuple(names[q] for q, _ in sorted(order.items(), key=lambda kv: kv[1]))
    return Dfa(alphabet, tuple(new_delta), 0,
               frozenset(i for q, i in order.items() if q in finals), new_names)


def lift(a: Dfa, alphabet: Alphabet) -> Dfa:
    """Re-express ``a`` over a superset alphabet; extra propositions are ignored."""
    if a.alphabet == alphabet:
        return a
    missing = [p for p in a.alphabet if p not in alphabet]
    if missing:
        raise AlphabetMismatch(f"propositions {missing} not in {alphabet.propositions}")
    bits = [alphabet.propositions.index(p) for p in a.alphabet.propositions]
    project = [sum(1 << k for k, b in enumerate(bits) if letter >> b & 1)
               for letter in alphabet.letters()]
    delta = tuple(tuple(row[project[L]] for L in alphabet.letters()) for row in a.delta)
    return Dfa(alphabet, delta, a.initial, a.finals, a.names)


def product(a: Dfa, b: Dfa) -> Dfa:
    """Synchronous product over reachable pairs; accepts L(a) ∩ L(b)."""
    if a.alphabet != b.alphabet:
        raise AlphabetMismatch(f"{a.alphabet.propositions} vs {b.alphabet.propositions}")
    start = (a.initial, b.initial)
    index = {start: 0}
    pairs = [start]
    delta: list[tuple[int, ...]] = []
    i = 0
    while i < len(pairs):
        qa, qb = pairs[i]
        row_a, row_b = a.delta[qa], b.delta[qb]
        row = []
        for letter in a.alphabet.letters():
            pair = (row_a[letter], row_b[letter])
            j = index.get(pair)
            if j is None:
                j = index[pair] = len(pairs)
                pairs.append(pair)
            row.append(j)
        delta.append(tuple(row))
        i += 1
    finals = frozenset(k for k, (qa, qb) in enumerate(pairs) if qa in a.finals and qb in b.finals)
    return Dfa(a.alphabet, tuple(delta), 0, finals, tuple(f"{qa},{qb}" for qa, qb in pairs))


def minimize(a: Dfa) -> Dfa:
    """Moore partition refinement on the reachable part, canonically numbered."""
    reach = a.reachable()
    local = {q: i for i, q in enumerate(reach)}
    delta = [[local[t] for t in a.delta[q]] for q in reach]
    block = [1 if q in a.finals else 0 for q in reach]
    n_blocks = len(set(block))
    while True:
        signatures: dict[tuple, int] = {}
        new_block = []
        for i, row in enumerate(delta):
            sig = (block[i], tuple(block[t] for t in row))
            new_block.append(signatures.setdefault(sig, len(signatures)))
        if len(signatures) == n_blocks:
            break
        block, n_blocks = new_block, len(signatures)
    quotient: dict[int, tuple[int, ...]] = {}
    for i, row in enumerate(delta):
        quotient.setdefault(block[i], tuple(block[t] for t in row))
    finals = {block[local[q]] for q in reach if q in a.finals}
    return _renumber(a.alphabet, quotient, block[0], finals)


def equivalent(a: Dfa, b: Dfa) -> bool:
    """Language equality via the product with symmetric-difference finals."""
    if a.alphabet != b.alphabet:
        raise AlphabetMismatch("alphabets differ")
    seen = {(a.initial, b.initial)}
    queue = deque(seen)
    while queue:
        qa, qb = queue.popleft()
        if (qa in a.finals) != (qb in b.finals):
            return False
        for letter in a.alphabet.letters():
            pair = (a.delta[qa][letter], b.delta[qb][letter])
            if pair not in seen:
                seen.add(pair)
                queue.append(pair)
    return True


def acceptance_table(a: Dfa, length: int) -> np.ndarray:
    """Acceptance of every word of exactly ``length`` letters.

    Words are indexed like :func:`tlcd_rl.ltlf.satisfaction_table`: base
    ``alphabet.size`` with the first letter most significant.
    """
    delta = np.asarray(a.delta, dtype=np.int64)
    states = np.array([a.initial], dtype=np.int64)
    for _ in range(length):
        states = delta[states].reshape(-1)
    finals = np.zeros(a.n_states, bool)
    finals[list(a.finals)] = True
    return finals[states]


# ---------------------------------------------------------------------------
# LTLf compilation
#
# A residual is a Boolean function over a fixed list of base terms: ALIVE
# (another letter follows), the atoms, and every X/F/G/U subformula. Reading
# a letter substitutes each base term by its progression, which is again such
# a function, so residuals are compared exactly as truth tables.

_ALIVE = object()


class _Compiler:
    def __init__(self, formula: Formula, props: tuple[str, ...]):
        self.formula = formula
        self.props = props
        terms: list = [_ALIVE]
        for g in subformulas(formula):
            if isinstance(g, (Atom, Next, Finally, Globally, Until)) and g not in terms:
                terms.append(g)
        if len(terms) > MAX_TEMPORAL_TERMS:
            raise StateBlowup(f"{len(terms)} base terms (limit {MAX_TEMPORAL_TERMS})")
        self.terms = terms
        self.slot = {t: i for i, t in enumerate(terms) if t is not _ALIVE}
        k = len(terms)
        assignments = np.arange(1 << k, dtype=np.int64)
        self.column = [((assignments >> i) & 1).astype(bool) for i in range(k)]
        self.ones = np.ones(1 << k, bool)
        self.zeros = np.zeros(1 << k, bool)

    def boolean(self, f: Formula, base) -> np.ndarray:
        """Evaluate the Boolean skeleton of ``f`` with ``base(term)`` at the leaves."""
        if isinstance(f, TrueF):
            return self.ones
        if isinstance(f, FalseF):
            return self.zeros
        if isinstance(f, Not):
            return ~self.boolean(f.arg, base)
        if isinstance(f, And):
            return self.boolean(f.left, base) & self.boolean(f.right, base)
        if isinstance(f, Or):
            return self.boolean(f.left, base) | self.boolean(f.right, base)
        if isinstance(f, Implies):
            return ~self.boolean(f.left, base) | self.boolean(f.right, base)
        return base(f)

    def function(self, f: Formula) -> np.ndarray:
        return self.boolean(f, lambda t: self.column[self.slot[t]])

    def progression(self, letter: frozenset[str]) -> list[np.ndarray]:
        alive = self.column[0]
        memo: dict = {}

        def prog(t) -> np.ndarray:
            if t in memo:
                return memo[t]
            if t is _ALIVE:
                v = self.ones
            elif isinstance(t, Atom):
                v = self.ones if t.name in letter else self.zeros
            elif isinstance(t, Next):
                v = alive & self.function(t.arg)
            elif isinstance(t, Finally):
                v = self.boolean(t.arg, prog) | (alive & self.column[self.slot[t]])
            elif isinstance(t, Globally):
                v = self.boolean(t.arg, prog) & self.column[self.slot[t]]
            elif isinstance(t, Until):
                v = self.boolean(t.right, prog) | (
                    self.boolean(t.left, prog) & alive & self.column[self.slot[t]])
            else:
                raise TypeError(t)
            memo[t] = v
            return v

        return [prog(t) for t in self.terms]

    def empty_assignment(self) -> int:
        """Index of the valuation used when no letter remains."""
        memo: dict = {}

        def empty(t) -> bool:
            if t in memo:
                return memo[t]
            if t is _ALIVE or isinstance(t, (Atom, Next)):
                v = False
            elif isinstance(t, Globally):
                v = True
            elif isinstance(t, Finally):
                v = self.boolean_scalar(t.arg, empty)
            elif isinstance(t, Until):
                v = self.boolean_scalar(t.right, empty)
            else:
                raise TypeError(t)
            memo[t] = v
            return v

        return sum(1 << i for i, t in enumerate(self.terms) if empty(t))

    def boolean_scalar(self, f: Formula, base) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Not):
            return not self.boolean_scalar(f.arg, base)
        if isinstance(f, And):
            return self.boolean_scalar(f.left, base) and self.boolean_scalar(f.right, base)
        if isinstance(f, Or):
            return self.boolean_scalar(f.left, base) or self.boolean_scalar(f.right, base)
        if isinstance(f, Implies):
            return (not self.boolean_scalar(f.left, base)) or self.boolean_scalar(f.right, base)
        return base(f)

    def build(self) -> Dfa:
        alphabet = Alphabet(self.props)
        gathers = []
        for letter in alphabet.letters():
            progs = self.progression(alphabet.decode(letter))
            idx = np.zeros_like(self.column[0], dtype=np.int64)
            for i, p in enumerate(progs):
                idx |= p.astype(np.int64) << i
            gathers.append(idx)
        at_end = self.empty_assignment()
        start = self.function(self.formula)
        index = {start.tobytes(): 0}
        residuals = [start]
        delta: list[tuple[int, ...]] = []
        i = 0
        while i < len(residuals):
            current = residuals[i]
            row = []
            for idx in gathers:
                nxt = current[idx]
                key = nxt.tobytes()
                j = index.get(key)
                if j is None:
                    if len(residuals) >= MAX_STATES:
                        raise StateBlowup(f"more than {MAX_STATES} states")
                    j = index[key] = len(residuals)
                    residuals.append(nxt)
                row.append(j)
            delta.append(tuple(row))
            i += 1
        finals = frozenset(j for j, r in enumerate(residuals) if r[at_end])
        return Dfa(alphabet, tuple(delta), 0, finals)


def compile_ltlf(formula: Formula, alphabet: Alphabet) -> Dfa:
    """Minimal DFA accepting exactly the non-empty traces satisfying ``formula``.

    Built by letter-wise progression over the formula's own propositions and
    lifted to ``alphabet`` afterwards.
    """
    used = atoms(formula)
    missing = sorted(used - set(alphabet.propositions))
    if missing:
        raise AlphabetMismatch(f"propositions {missing} not in {alphabet.propositions}")
    props = tuple(p for p in alphabet.propositions if p in used)
    dfa = minimize(_Compiler(formula, props).build())
    return minimize(lift(dfa, alphabet))


# ---------------------------------------------------------------------------
# MDP skeleton

def mdp_skeleton(m) -> Nfa:
    """Nondeterministic view of a labeled MDP: an edge s -l-> s' whenever some
    action reaches s' from s with positive probability and emits l."""
    size = m.alphabet.size
    delta = []
    for s in range(m.n_states):
        row: list[set[int]] = [set() for _ in range(size)]
        for outcomes in m.transitions[s]:
            for prob, nxt, letter in outcomes:
                if prob > 0:
                    row[letter].add(nxt)
        delta.append(tuple(frozenset(x) for x in row))
    return Nfa(m.alphabet, tuple(delta), m.initial, frozenset(range(m.n_states)))


# ---------------------------------------------------------------------------
# guards and export

def letter_guard(alphabet: Alphabet, letters: Iterable[int]) -> Formula:
    """A small propositional formula true exactly on ``letters``."""
    letters = sorted(set(letters))
    if not letters:
        return FALSE
    if len(letters) == alphabet.size:
        return TRUE
    from sympy import And as SAnd, Not as SNot, Or as SOr, Symbol, true as strue
    from sympy.logic import SOPform

    names = alphabet.propositions
    symbols = [Symbol(p) for p in names]
    minterms = [[letter >> k & 1 for k in range(len(names))] for letter in letters]
    expr = SOPform(symbols, minterms)

    def convert(e) -> Formula:
        if e == strue:
            return TRUE
        if isinstance(e, Symbol):
            return Atom(e.name)
        if isinstance(e, SNot):
            return Not(convert(e.args[0]))
        parts = sorted((convert(x) for x in e.args), key=str)
        kind = And if isinstance(e, SAnd) else Or
        assert isinstance(e, (SAnd, SOr))
        out = parts[0]
        for g in parts[1:]:
            out = kind(out, g)
        return out

    return convert(expr)


def _edges(a: Dfa) -> list[tuple[int, Formula, int]]:
    edges = []
    for q, row in enumerate(a.delta):
        targets: dict[int, list[int]] = {}
        for letter, t in enumerate(row):
            targets.setdefault(t, []).append(letter)
        for t, letters in targets.items():
            edges.append((q, letter_guard(a.alphabet, letters), t))
    return edges


def to_json(a: Dfa) -> dict:
    return {
        "propositions": list(a.alphabet.propositions),
        "states": list(range(a.n_states)),
        "initial": a.initial,
        "finals": sorted(a.finals),
        "transitions": [{"from": q, "guard": str(g), "to": t} for q, g, t in _edges(a)],
    }


def from_json(data: dict | str, alphabet: Alphabet | None = None) -> Dfa:
    """Build a DFA from the JSON schema written by :func:`to_json`.

    For each state and letter the first listed transition whose guard holds
    is taken; letters matched by no guard loop on the state. ``states`` may
    be a count or a list of ids.
    """
    if isinstance(data, str):
        data = json.loads(data)
    own = Alphabet(tuple(data["propositions"]))
    states = data["states"]
    ids = list(range(states)) if isinstance(states, int) else list(states)
    pos = {s: i for i, s in enumerate(ids)}
    rules: dict[int, list[tuple[Formula, int]]] = {i: [] for i in range(len(ids))}
    for tr in data["transitions"]:
        guard = parse_formula(str(tr["guard"]), own.propositions)
        if any(isinstance(g, (Next, Until, Finally, Globally)) for g in subformulas(guard)):
            raise ValueError(f"guard {tr['guard']!r} is not propositional")
        rules[pos[tr["from"]]].append((guard, pos[tr["to"]]))
    delta = []
    for q in range(len(ids)):
        row = []
        for letter in own.letters():
            labels = own.decode(letter)
            target = q
            for guard, t in rules[q]:
                if evaluate(guard, [labels]):
                    target = t
                    break
            row.append(target)
        delta.append(tuple(row))
    names = tuple(str(s) for s in ids)
    dfa = Dfa(own, tuple(delta), pos[data["initial"]],
              frozenset(pos[f] for f in data["finals"]), names)
    return dfa if alphabet is None else lift(dfa, alphabet)


def to_dot(a: Dfa | Nfa, name: str = "A") -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for q in range(a.n_states):
        shape = "doublecircle" if q in a.finals else "circle"
        lines.append(f'  {q} [shape={shape}, label="{q}"];')
    lines.append(f"  __start -> {a.initial};")
    if isinstance(a, Dfa):
        edges = _edges(a)
    else:
        edges = []
        for q, row in enumerate(a.delta):
            targets: dict[int, list[int]] = {}
            for letter, ts in enumerate(row):
                for t in ts:
                    targets.setdefault(t, []).append(letter)
            edges.extend((q, letter_guard(a.alphabet, ls), t) for t, ls in targets.items())
    for q, g, t in edges:
        label = str(g).replace('"', '\\"')
        lines.append(f'  {q} -> {t} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
