"""Tabular Q-learning over MDP x task DFA, with optional causal early stopping.

One episode routine serves both algorithms: QRM is the routine without a
classification table, QTLCD passes the table of causally accepting and
rejecting configurations, which overrides the cumulative reward and ends the
episode as soon as a decided configuration is reached.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .automata import Dfa
from .causal import ClassificationTable, check_compatibility, classify_all
from .environments import LabeledMdp
from .tlcd import TlCd, to_causal_dfa


class NoValidAction(ValueError):
    pass


class IncompatibleDiagram(ValueError):
    def __init__(self, counterexample):
        self.counterexample = counterexample
        super().__init__(f"diagram incompatible with the MDP; stuck product state {counterexample}")


class Termination(str, Enum):
    TASK_ACCEPTED = "task_accepted"
    CAUSALLY_ACCEPTED = "causally_accepted"
    CAUSALLY_REJECTED = "causally_rejected"
    TIMEOUT = "timeout"


@dataclass
class LearnerConfig:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    eplength: int = 1000
    total_training_steps: int = 100_000
    eval_every: int = 1000
    eval_episodes: int = 1
    seed: int = 42
    q_init: float = 1.0
    counterfactual: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.eplength < 1 or self.eval_every < 1 or self.eval_episodes < 1:
            raise ValueError("eplength, eval_every and eval_episodes must be positive")
        if self.total_training_steps < 0:
            raise ValueError("total_training_steps must be non-negative")


class QFunctionBank:
    """One table ``q[task_state][mdp_state][action]`` per task-DFA state."""

    def __init__(self, n_task: int, n_states: int, n_actions: int, init: float = 0.0):
        self.q = [[[init] * n_actions for _ in range(n_states)] for _ in range(n_task)]

    def __getitem__(self, task_state: int) -> list[list[float]]:
        return self.q[task_state]

    def max_abs(self) -> float:
        return max(abs(v) for table in self.q for row in table for v in row)

    def copy(self) -> "QFunctionBank":
        other = QFunctionBank.__new__(QFunctionBank)
        other.q = [[list(row) for row in table] for table in self.q]
        return other

    def __eq__(self, other) -> bool:
        return isinstance(other, QFunctionBank) and self.q == other.q


@dataclass
class EpisodeOutcome:
    steps: int
    termination: Termination
    reward: int


def greedy_action(row: list[float], valid: tuple[int, ...]) -> int:
    best = valid[0]
    best_value = row[best]
    for a in valid[1:]:
        v = row[a]
        if v > best_value:
            best, best_value = a, v
    return best


def epsilon_greedy(row: list[float], valid: tuple[int, ...], epsilon: float,
                   rng: random.Random) -> int:
    """Uniform valid action with probability ``epsilon``, otherwise the
    greedy one with ties going to the lowest action index."""
    if not valid:
        raise NoValidAction("no valid action")
    if epsilon > 0 and rng.random() < epsilon:
        return valid[int(rng.random() * len(valid))]
    return greedy_action(row, valid)


class _Compiled:
    """Flat lookup tables shared by the episode loops."""

    def __init__(self, m: LabeledMdp, task: Dfa, table: ClassificationTable | None):
        if task.alphabet != m.alphabet:
            raise ValueError("task DFA and MDP use different alphabets")
        self.valid = [tuple(v) for v in m.valid]
        self.outcomes = m.transitions
        n_actions = len(m.actions)
        self.det_next = [[-1] * n_actions for _ in range(m.n_states)]
        self.det_letter = [[0] * n_actions for _ in range(m.n_states)]
        for s in range(m.n_states):
            for a in self.valid[s]:
                out = m.transitions[s][a]
                if len(out) == 1:
                    self.det_next[s][a] = out[0][1]
                    self.det_letter[s][a] = out[0][2]
        self.deterministic = m.is_deterministic()
        self.task_delta = task.delta
        self.task_final = [q in task.finals for q in range(task.n_states)]
        self.initial = m.initial
        self.task_initial = task.initial
        if table is not None:
            self.causal_delta = table.causal.delta
            self.causal_initial = table.causal.initial
            self.codes = table.codes()
        else:
            self.causal_delta = None
            self.causal_initial = 0
            self.codes = None


def _run_episode(env: _Compiled, bank: QFunctionBank, cfg: LearnerConfig, rng: random.Random,
                 max_steps: int, early_stop: bool, hook: Callable[[int], None] | None = None,
                 hook_every: int = 1, hook_offset: int = 0) -> EpisodeOutcome:
    """Shared QRM/QTLCD loop. The override and interrupt only apply when
    ``early_stop`` is set and the environment carries a classification."""
    q = bank.q
    bound = 1.0 / (1.0 - cfg.gamma) if cfg.gamma < 1 else float("inf")
    bound = max(bound, abs(cfg.q_init))
    alpha, gamma, eps = cfg.alpha, cfg.gamma, cfg.epsilon
    valid, det_next, det_letter, outcomes = env.valid, env.det_next, env.det_letter, env.outcomes
    tdelta, tfinal = env.task_delta, env.task_final
    cdelta, codes = env.causal_delta, env.codes
    use_causal = early_stop and codes is not None
    counterfactual = cfg.counterfactual
    n_task = len(tdelta)
    s, u, c = env.initial, env.task_initial, env.causal_initial
    R = 0
    for t in range(max_steps):
        row = q[u][s]
        va = valid[s]
        if eps > 0 and rng.random() < eps:
            a = va[int(rng.random() * len(va))]
        else:
            a = va[0]
            best = row[a]
            for b in va:
                if row[b] > best:
                    a, best = b, row[b]
        s2 = det_next[s][a]
        if s2 >= 0:
            letter = det_letter[s][a]
        else:
            x = rng.random()
            for prob, s2, letter in outcomes[s][a]:
                x -= prob
                if x < 0:
                    break
        u2 = tdelta[u][letter]
        R2 = 1 if tfinal[u2] else 0
        code = 0
        if use_causal:
            c2 = cdelta[c][letter]
            code = codes[u2][c2]
            if code == 1:
                R2 = 1
            elif code == -1:
                R2 = 0
        terminal = tfinal[u2] or code != 0
        if counterfactual:
            for v in range(n_task):
                v2 = tdelta[v][letter]
                rv = (1 if tfinal[v2] else 0) - (1 if tfinal[v] else 0)
                if v == u:
                    rv, v_terminal = R2 - R, terminal
                else:
                    v_terminal = tfinal[v2]
                qrow = q[v][s]
                if v_terminal:
                    target = rv
                else:
                    nrow = q[v2][s2]
                    target = rv + gamma * max(nrow[b] for b in valid[s2])
                qrow[a] += alpha * (target - qrow[a])
                assert -bound <= qrow[a] <= bound, "q-value left its bound"
        else:
            if terminal:
                target = R2 - R
            else:
                nrow = q[u2][s2]
                nv = valid[s2]
                m = nrow[nv[0]]
                for b in nv:
                    if nrow[b] > m:
                        m = nrow[b]
                target = R2 - R + gamma * m
            row[a] += alpha * (target - row[a])
            assert -bound <= row[a] <= bound, "q-value left its bound"
        if hook is not None and (hook_offset + t + 1) % hook_every == 0:
            hook(hook_offset + t + 1)
        if tfinal[u2]:
            return EpisodeOutcome(t + 1, Termination.TASK_ACCEPTED, R2)
        if code == 1:
            return EpisodeOutcome(t + 1, Termination.CAUSALLY_ACCEPTED, R2)
        if code == -1:
            return EpisodeOutcome(t + 1, Termination.CAUSALLY_REJECTED, R2)
        s, u, R = s2, u2, R2
        if use_causal:
            c = c2
    return EpisodeOutcome(max_steps, Termination.TIMEOUT, R)


def run_episode_qtlcd(m: LabeledMdp, task: Dfa, causal: Dfa, classification: ClassificationTable,
                      q: QFunctionBank, cfg: LearnerConfig,
                      rng: random.Random) -> tuple[QFunctionBank, EpisodeOutcome]:
    """One training episode with causal reward override and early interruption.

    ``q`` is updated in place and returned.
    """
    if classification.task != task or classification.causal != causal:
        raise ValueError("classification was computed for a different automaton pair")
    env = _Compiled(m, task, classification)
    return q, _run_episode(env, q, cfg, rng, cfg.eplength, early_stop=True)


def run_episode_qrm(m: LabeledMdp, task: Dfa, q: QFunctionBank, cfg: LearnerConfig,
                    rng: random.Random) -> tuple[QFunctionBank, EpisodeOutcome]:
    """One training episode without causal knowledge."""
    env = _Compiled(m, task, None)
    return q, _run_episode(env, q, cfg, rng, cfg.eplength, early_stop=False)


def evaluate_greedy(env: _Compiled, bank: QFunctionBank, cfg: LearnerConfig,
                    rng: random.Random) -> float:
    """Mean true task reward of the greedy policy over ``eval_episodes``.

    No learning and no early stopping. In a deterministic MDP every episode
    is identical, so one is simulated; a revisited (state, task state) pair
    with only deterministic steps since its first visit is a loop and counts
    as failure, exactly as running it to the timeout would.
    """
    q = bank.q
    valid, det_next, det_letter, outcomes = env.valid, env.det_next, env.det_letter, env.outcomes
    tdelta, tfinal = env.task_delta, env.task_final
    episodes = 1 if env.deterministic else cfg.eval_episodes
    total = 0
    for _ in range(episodes):
        s, u = env.initial, env.task_initial
        seen = set()
        for _t in range(cfg.eplength):
            key = (s, u)
            if key in seen:
                break
            seen.add(key)
            row = q[u][s]
            va = valid[s]
            a = va[0]
            best = row[a]
            for b in va:
                if row[b] > best:
                    a, best = b, row[b]
            s2 = det_next[s][a]
            if s2 >= 0:
                letter = det_letter[s][a]
            else:
                seen.clear()
                x = rng.random()
                for prob, s2, letter in outcomes[s][a]:
                    x -= prob
                    if x < 0:
                        break
            u = tdelta[u][letter]
            s = s2
            if tfinal[u]:
                total += 1
                break
    return total / episodes


@dataclass
class TrainResult:
    bank: QFunctionBank
    curve: list[tuple[int, float]]
    episodes: list[EpisodeOutcome] = field(default_factory=list)
    classification: ClassificationTable | None = None


def train(m: LabeledMdp, task: Dfa, cfg: LearnerConfig, tlcd: TlCd | None = None,
          causal: Dfa | None = None) -> TrainResult:
    """Train for ``cfg.total_training_steps`` environment steps.

    With a diagram (or a ready causal DFA) this is QTLCD, otherwise QRM.
    Every ``eval_every`` steps the greedy policy is evaluated on the true
    task reward and ``(step, mean_reward)`` is appended to the curve.
    """
    table = None
    if tlcd is not None and causal is None:
        causal = to_causal_dfa(tlcd, m.alphabet)
    if causal is not None:
        compat = check_compatibility(m, causal)
        if not compat:
            raise IncompatibleDiagram(compat.counterexample)
        table = classify_all(task, causal)
    env = _Compiled(m, task, table)
    bank = QFunctionBank(task.n_states, m.n_states, len(m.actions), cfg.q_init)
    rng = random.Random(cfg.seed)
    eval_rng = random.Random(f"eval-{cfg.seed}")
    curve: list[tuple[int, float]] = []
    episodes: list[EpisodeOutcome] = []
    done = 0

    def record(step: int):
        curve.append((step, evaluate_greedy(env, bank, cfg, eval_rng)))

    while done < cfg.total_training_steps:
        # the last episode is cut short so exactly total_training_steps are spent
        budget = min(cfg.eplength, cfg.total_training_steps - done)
        outcome = _run_episode(env, bank, cfg, rng, budget, early_stop=table is not None,
                               hook=record, hook_every=cfg.eval_every, hook_offset=done)
        done += outcome.steps
        episodes.append(outcome)
    return TrainResult(bank, curve, episodes, table)
