"""Causal classification of task x causal configurations and MDP compatibility."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator, Mapping, NamedTuple

from .automata import AlphabetMismatch, Dfa, mdp_skeleton


class Verdict(str, Enum):
    ACCEPTING = "accepting"
    REJECTING = "rejecting"
    NEITHER = "neither"


class Configuration(NamedTuple):
    task_state: int
    causal_state: int


@dataclass(frozen=True)
class CausalClassification:
    """Verdict for one configuration.

    ``witness`` is the set of task states that co-occur with a causal final
    state somewhere reachable from the configuration. An empty witness makes
    both definitions hold vacuously; that case is reported as rejecting with
    ``vacuous`` set.
    """

    verdict: Verdict
    witness: frozenset[int]
    vacuous: bool = False

    @property
    def decided(self) -> bool:
        return self.verdict is not Verdict.NEITHER


def _same_alphabet(task: Dfa, causal: Dfa):
    if task.alphabet != causal.alphabet:
        raise AlphabetMismatch(
            f"task over {task.alphabet.propositions}, causal over {causal.alphabet.propositions}")


def _reachable_pairs(task: Dfa, causal: Dfa, start: tuple[int, int]) -> tuple[list[tuple[int, int]], int]:
    seen = {start}
    order = [start]
    queue = deque(order)
    visits = 0
    letters = task.alphabet.letters()
    while queue:
        qt, qc = queue.popleft()
        row_t, row_c = task.delta[qt], causal.delta[qc]
        for letter in letters:
            visits += 1
            pair = (row_t[letter], row_c[letter])
            if pair not in seen:
                seen.add(pair)
                order.append(pair)
                queue.append(pair)
    return order, visits


def _verdict(task: Dfa, witness: frozenset[int]) -> CausalClassification:
    if not witness:
        return CausalClassification(Verdict.REJECTING, witness, vacuous=True)
    if witness <= task.finals:
        return CausalClassification(Verdict.ACCEPTING, witness)
    if not witness & task.finals:
        return CausalClassification(Verdict.REJECTING, witness)
    return CausalClassification(Verdict.NEITHER, witness)


def classify(task: Dfa, causal: Dfa, cfg: Configuration | tuple[int, int]) -> CausalClassification:
    """Breadth-first search of the product from ``cfg``; collect the task
    components of reached pairs whose causal component is final."""
    return _classify(task, causal, tuple(cfg))[0]


def _classify(task, causal, cfg) -> tuple[CausalClassification, int]:
    _same_alphabet(task, causal)
    qt, qc = cfg
    if not (0 <= qt < task.n_states and 0 <= qc < causal.n_states):
        raise ValueError(f"configuration {cfg} out of range")
    pairs, visits = _reachable_pairs(task, causal, (qt, qc))
    witness = frozenset(t for t, c in pairs if c in causal.finals)
    return _verdict(task, witness), visits


class ClassificationTable(Mapping[Configuration, CausalClassification]):
    """Verdicts for every configuration reachable from the initial pair.

    ``edge_visits`` maps each configuration to the number of product edges
    its search traversed.
    """

    def __init__(self, task: Dfa, causal: Dfa, entries: dict, edge_visits: dict):
        self.task = task
        self.causal = causal
        self._entries = entries
        self.edge_visits = edge_visits

    def __getitem__(self, cfg) -> CausalClassification:
        return self._entries[Configuration(*cfg)]

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def total_edge_visits(self) -> int:
        return sum(self.edge_visits.values())

    def codes(self) -> list[list[int]]:
        """Dense lookup ``codes[task][causal]``: 1 accepting, -1 rejecting, 0 otherwise."""
        out = [[0] * self.causal.n_states for _ in range(self.task.n_states)]
        for (qt, qc), c in self._entries.items():
            if c.verdict is Verdict.ACCEPTING:
                out[qt][qc] = 1
            elif c.verdict is Verdict.REJECTING:
                out[qt][qc] = -1
        return out


@lru_cache(maxsize=64)
def classify_all(task: Dfa, causal: Dfa) -> ClassificationTable:
    _same_alphabet(task, causal)
    configs, _ = _reachable_pairs(task, causal, (task.initial, causal.initial))
    entries = {}
    visits = {}
    for pair in configs:
        cfg = Configuration(*pair)
        entries[cfg], visits[cfg] = _classify(task, causal, pair)
    return ClassificationTable(task, causal, entries, visits)


class Compatibility(NamedTuple):
    compatible: bool
    counterexample: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.compatible


def check_compatibility(m, causal: Dfa) -> Compatibility:
    """Every product state of the MDP skeleton and the causal DFA reachable
    from the start must still be able to reach a causal final state."""
    if m.alphabet != causal.alphabet:
        raise AlphabetMismatch(
            f"MDP over {m.alphabet.propositions}, causal over {causal.alphabet.propositions}")
    skeleton = mdp_skeleton(m)
    start = (skeleton.initial, causal.initial)
    seen = {start}
    order = [start]
    preds: dict[tuple[int, int], list[tuple[int, int]]] = {}
    queue = deque(order)
    while queue:
        s, q = queue.popleft()
        for letter, targets in enumerate(skeleton.delta[s]):
            if not targets:
                continue
            q2 = causal.delta[q][letter]
            for s2 in targets:
                nxt = (s2, q2)
                preds.setdefault(nxt, []).append((s, q))
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
    good = {x for x in order if x[1] in causal.finals}
    queue = deque(good)
    while queue:
        x = queue.popleft()
        for y in preds.get(x, ()):
            if y not in good:
                good.add(y)
                queue.append(y)
    for x in order:
        if x not in good:
            return Compatibility(False, x)
    return Compatibility(True)
