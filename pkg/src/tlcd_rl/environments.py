"""Labeled MDPs, grid maps and the bundled case-study environments."""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

from .automata import Alphabet, Dfa, from_json
from .tlcd import TlCd, parse_tlcd

MOVES = {"N": (0, -1), "S": (0, 1), "E": (1, 0), "W": (-1, 0)}
GRID_ACTIONS = ("S", "N", "E", "W")
CROSSROAD_ACTIONS = ("S", "N", "E", "W", "PressButton", "Wait")


class InvalidAction(ValueError):
    pass


class MapFormatError(ValueError):
    pass


@dataclass(eq=False)
class LabeledMdp:
    """Finite labeled MDP with rewards left to a task automaton.

    ``transitions[s][a]`` lists ``(probability, next_state, letter)``
    outcomes, so the labeling function is stored on the transition support.
    ``valid[s]`` lists the action indices allowed in ``s``.
    """

    alphabet: Alphabet
    actions: tuple[str, ...]
    transitions: list[list[tuple[tuple[float, int, int], ...]]]
    initial: int
    valid: list[tuple[int, ...]] | None = None
    state_names: list = field(default_factory=list)

    def __post_init__(self):
        if self.valid is None:
            self.valid = [tuple(range(len(self.actions)))] * len(self.transitions)
        for s, row in enumerate(self.transitions):
            if len(row) != len(self.actions):
                raise ValueError(f"state {s}: expected {len(self.actions)} actions")
            for a in self.valid[s]:
                total = sum(p for p, _, _ in row[a])
                if abs(total - 1.0) > 1e-9:
                    raise ValueError(f"distribution at ({s}, {self.actions[a]}) sums to {total}")
        if not self.state_names:
            self.state_names = list(range(len(self.transitions)))

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    def action_index(self, action: str | int) -> int:
        if isinstance(action, int):
            return action
        try:
            return self.actions.index(action)
        except ValueError:
            raise InvalidAction(f"unknown action {action!r}") from None

    def is_deterministic(self) -> bool:
        return all(len(self.transitions[s][a]) == 1
                   for s in range(self.n_states) for a in self.valid[s])

    def label(self, s: int, a: str | int, s2: int) -> frozenset[str]:
        for _, nxt, letter in self.transitions[s][self.action_index(a)]:
            if nxt == s2:
                return self.alphabet.decode(letter)
        raise ValueError(f"{s2} is not a successor of ({s}, {a})")


def step(m: LabeledMdp, s: int, a: str | int, rng: random.Random) -> tuple[int, frozenset[str]]:
    """Sample a successor of ``(s, a)`` and return it with the emitted label."""
    ai = m.action_index(a)
    if ai not in m.valid[s]:
        raise InvalidAction(f"action {m.actions[ai]} not allowed in state {m.state_names[s]}")
    outcomes = m.transitions[s][ai]
    if len(outcomes) == 1:
        _, nxt, letter = outcomes[0]
    else:
        x = rng.random()
        for prob, nxt, letter in outcomes:
            x -= prob
            if x < 0:
                break
    return nxt, m.alphabet.decode(letter)


@dataclass(frozen=True)
class Trajectory:
    states: tuple[int, ...]
    actions: tuple[int, ...]
    labels: tuple[frozenset[str], ...]


def rollout(m: LabeledMdp, actions: Sequence[str | int], rng: random.Random | None = None) -> Trajectory:
    rng = rng or random.Random(0)
    s = m.initial
    states, acts, labels = [s], [], []
    for a in actions:
        s, label = step(m, s, a, rng)
        states.append(s)
        acts.append(m.action_index(a))
        labels.append(label)
    return Trajectory(tuple(states), tuple(acts), tuple(labels))


# ---------------------------------------------------------------------------
# grid maps

@dataclass
class GridSpec:
    width: int
    height: int
    walls: set[tuple[int, int]]
    start: tuple[int, int]
    markers: dict[tuple[int, int], list[str]] = field(default_factory=dict)
    doors: dict[tuple[int, int], str] = field(default_factory=dict)
    light_prob: float | None = None

    def free(self, cell: tuple[int, int]) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height and cell not in self.walls

    def propositions(self) -> list[str]:
        seen = []
        for props in self.markers.values():
            for p in props:
                if p not in seen:
                    seen.append(p)
        return seen


def parse_map(text: str) -> GridSpec:
    """Parse the map format.

    First line ``width height``, then ``height`` rows of ``X`` (wall), ``.``
    (free) or ``o`` (start). After the rows: ``marker <prop> <x> <y>``,
    ``door <prop> <x> <y> <dir>`` and ``lightprob <p>`` lines. A door cell
    can only be entered, and left, moving in ``<dir>``.
    """
    lines = [ln.rstrip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        width, height = (int(v) for v in lines[0].split())
    except (IndexError, ValueError):
        raise MapFormatError("first line must be '<width> <height>'") from None
    rows = lines[1:1 + height]
    if len(rows) != height or any(len(r) != width for r in rows):
        raise MapFormatError(f"expected {height} rows of width {width}")
    walls, start = set(), None
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "X":
                walls.add((x, y))
            elif ch == "o":
                start = (x, y)
            elif ch != ".":
                raise MapFormatError(f"unexpected {ch!r} at ({x}, {y})")
    if start is None:
        raise MapFormatError("no start cell 'o'")
    spec = GridSpec(width, height, walls, start)
    for line in lines[1 + height:]:
        parts = line.split()
        if parts[0] == "marker" and len(parts) == 4:
            cell = (int(parts[2]), int(parts[3]))
            spec.markers.setdefault(cell, []).append(parts[1])
        elif parts[0] == "door" and len(parts) == 5 and parts[4] in MOVES:
            cell = (int(parts[2]), int(parts[3]))
            spec.markers.setdefault(cell, []).append(parts[1])
            spec.doors[cell] = parts[4]
        elif parts[0] == "lightprob" and len(parts) == 2:
            spec.light_prob = float(parts[1])
        else:
            raise MapFormatError(f"cannot read line {line!r}")
    for cell in spec.markers:
        if not spec.free(cell):
            raise MapFormatError(f"marker at {cell} is outside the grid or on a wall")
    return spec


def _move(spec: GridSpec, cell: tuple[int, int], direction: str) -> tuple[int, int]:
    """Target of a move; walls, the border and door rules leave the agent in place."""
    dx, dy = MOVES[direction]
    target = (cell[0] + dx, cell[1] + dy)
    if not spec.free(target):
        return cell
    if cell in spec.doors and spec.doors[cell] != direction:
        return cell
    if target in spec.doors and spec.doors[target] != direction:
        return cell
    return target


def grid_mdp(spec: GridSpec, alphabet: Alphabet | None = None) -> LabeledMdp:
    """Deterministic four-action grid; entering a marked cell emits its propositions."""
    alphabet = alphabet or Alphabet(tuple(spec.propositions()))
    cells = [(x, y) for y in range(spec.height) for x in range(spec.width) if spec.free((x, y))]
    index = {c: i for i, c in enumerate(cells)}
    transitions = []
    for cell in cells:
        row = []
        for name in GRID_ACTIONS:
            target = _move(spec, cell, name)
            letter = alphabet.encode(spec.markers.get(target, ())) if target != cell else 0
            row.append(((1.0, index[target], letter),))
        transitions.append(row)
    return LabeledMdp(alphabet, GRID_ACTIONS, transitions, index[spec.start], state_names=cells)


# ---------------------------------------------------------------------------
# crossroad

def crossroad_mdp(spec: GridSpec, alphabet: Alphabet | None = None) -> LabeledMdp:
    """Grid with a push button and a pedestrian light.

    The cell marked ``b`` holds the button and the cell marked ``c`` is the
    far side of the crossing. ``PressButton`` on the button emits ``b`` and
    starts the wait; while waiting only ``Wait`` is allowed (label ``p``) and
    the light comes on with probability ``light_prob`` per step. Once lit,
    only the crossing move ``E`` is allowed and it emits ``l`` and ``c``.
    """
    alphabet = alphabet or Alphabet(("b", "p", "l", "c"))
    prob = 0.01 if spec.light_prob is None else spec.light_prob
    button = next(c for c, ps in spec.markers.items() if "b" in ps)
    far = next(c for c, ps in spec.markers.items() if "c" in ps)
    cells = [(x, y) for y in range(spec.height) for x in range(spec.width)
             if spec.free((x, y)) and (x, y) != far]
    index = {c: i for i, c in enumerate(cells)}
    waiting, lit, crossed = len(cells), len(cells) + 1, len(cells) + 2
    press, wait = CROSSROAD_ACTIONS.index("PressButton"), CROSSROAD_ACTIONS.index("Wait")
    cross = CROSSROAD_ACTIONS.index("E")
    enc = alphabet.encode
    stay = lambda s: ((1.0, s, 0),)  # noqa: E731
    transitions, valid = [], []
    for cell in cells:
        row = []
        for name in CROSSROAD_ACTIONS[:4]:
            target = _move(spec, cell, name)
            row.append(stay(index[cell]) if target == far else ((1.0, index[target], 0),))
        row.append(((1.0, waiting, enc({"b"})),) if cell == button else stay(index[cell]))
        row.append(stay(index[cell]))
        transitions.append(row)
        valid.append(tuple(range(len(CROSSROAD_ACTIONS))))
    blocked = ((1.0, 0, 0),)  # placeholder for masked actions, never sampled
    wait_row = [blocked] * len(CROSSROAD_ACTIONS)
    wait_row[wait] = ((1.0 - prob, waiting, enc({"p"})), (prob, lit, enc({"p"})))
    lit_row = [blocked] * len(CROSSROAD_ACTIONS)
    lit_row[cross] = ((1.0, crossed, enc({"l", "c"})),)
    done_row = [stay(crossed)] * len(CROSSROAD_ACTIONS)
    transitions += [wait_row, lit_row, done_row]
    valid += [(wait,), (cross,), (wait,)]
    names = cells + [("waiting", button), ("lit", button), ("crossed", far)]
    return LabeledMdp(alphabet, CROSSROAD_ACTIONS, transitions, index[spec.start], valid, names)


# ---------------------------------------------------------------------------
# case studies

class CaseStudy(NamedTuple):
    mdp: LabeledMdp
    task: Dfa
    tlcd: TlCd


def assets_dir() -> Path:
    override = os.environ.get("TLCD_RL_ASSETS")
    if override:
        return Path(override)
    return Path(str(resources.files("tlcd_rl") / "assets"))


def _read(name: str) -> str:
    return (assets_dir() / name).read_text()


def load_case(name: str, kind: str = "grid") -> CaseStudy:
    spec = parse_map(_read(f"{name}.map"))
    task_data = _read(f"{name}.task.json")
    alphabet = Alphabet(tuple(json.loads(task_data)["propositions"]))
    build = crossroad_mdp if kind == "crossroad" else grid_mdp
    mdp = build(spec, alphabet)
    return CaseStudy(mdp, from_json(task_data), parse_tlcd(_read(f"{name}.tlcd"), alphabet))


def build_small_office() -> CaseStudy:
    return load_case("smalloffice")


def build_large_office() -> CaseStudy:
    return load_case("largeoffice")


def build_crossroad() -> CaseStudy:
    return load_case("crossroad", kind="crossroad")


def build_seed_world() -> CaseStudy:
    """The farmer example: plant (p) then a tree grows (g), or sell (s) then buy (b)."""
    alphabet = Alphabet.of("p", "g", "s", "b")
    actions = ("plant", "sell", "buy", "wait")
    home, planted, sold, tree = range(4)
    p, g, s = alphabet.encode("p"), alphabet.encode("g"), alphabet.encode("s")
    det = lambda nxt, letter=0: ((1.0, nxt, letter),)  # noqa: E731
    transitions = [
        [det(planted, p), det(sold, s), det(home), det(home)],
        [det(tree, g)] * 4,
        [det(sold)] * 4,
        [det(tree)] * 4,
    ]
    mdp = LabeledMdp(alphabet, actions, transitions, home,
                     state_names=["home", "planted", "sold", "tree"])
    task = from_json({
        "propositions": list(alphabet.propositions),
        "states": 4, "initial": 0, "finals": [3],
        "transitions": [
            {"from": 0, "guard": "s", "to": 2},
            {"from": 0, "guard": "p", "to": 1},
            {"from": 1, "guard": "g", "to": 3},
            {"from": 2, "guard": "b", "to": 3},
            {"from": 3, "guard": "true", "to": 3},
        ],
    })
    return CaseStudy(mdp, task, parse_tlcd("p => X g\ns => G !X b", alphabet))


CASE_STUDIES = {
    "smalloffice": build_small_office,
    "largeoffice": build_large_office,
    "crossroad": build_crossroad,
    "seed": build_seed_world,
}


def load_environment(name: str) -> CaseStudy:
    """Bundled case study by id, or a ``<stem>.map`` path with sibling
    ``<stem>.task.json`` and ``<stem>.tlcd`` files."""
    if name in CASE_STUDIES:
        return CASE_STUDIES[name]()
    path = Path(name)
    stem = path.with_suffix("") if path.suffix == ".map" else path
    spec_text = stem.with_suffix(".map").read_text()
    task_text = Path(f"{stem}.task.json").read_text()
    task = from_json(task_text)
    spec = parse_map(spec_text)
    kind = crossroad_mdp if spec.light_prob is not None else grid_mdp
    mdp = kind(spec, task.alphabet)
    return CaseStudy(mdp, task, parse_tlcd(Path(f"{stem}.tlcd").read_text(), task.alphabet))
