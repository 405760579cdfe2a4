import json
import random

import numpy as np
import pytest

from tlcd_rl.automata import (
    Alphabet, AlphabetMismatch, AlphabetTooLarge, Dfa, StateBlowup, acceptance_table,
    accepts, compile_ltlf, complement, empty_language, equivalent, from_json, lift,
    mdp_skeleton, minimize, product, to_dot, to_json, universal,
)
from tlcd_rl.environments import LabeledMdp, build_seed_world, build_small_office
from tlcd_rl.ltlf import parse_formula

from oracles import all_traces, naive_holds, random_dfa, random_formula, run_dfa

SEED = Alphabet.of("p", "g", "s", "b")

# Task DFA of the seed example; selling wins when p and s occur together.
SEED_TASK = {
    "propositions": ["p", "g", "s", "b"], "states": 4, "initial": 0, "finals": [3],
    "transitions": [
        {"from": 0, "guard": "s", "to": 2},
        {"from": 0, "guard": "p", "to": 1},
        {"from": 1, "guard": "g", "to": 3},
        {"from": 2, "guard": "b", "to": 3},
        {"from": 3, "guard": "true", "to": 3},
    ],
}

# Causal DFA of the seed example, transcribed by hand. c0: nothing pending,
# c1: g owed next, c2: s seen so b is banned from the next step on,
# c3: both, 4: violation trap.
SEED_CAUSAL = {
    "propositions": ["p", "g", "s", "b"], "states": 5, "initial": 0, "finals": [0, 2],
    "transitions": [
        {"from": 0, "guard": "!p & !s", "to": 0},
        {"from": 0, "guard": "p & !s", "to": 1},
        {"from": 0, "guard": "s & !p", "to": 2},
        {"from": 0, "guard": "p & s", "to": 3},
        {"from": 1, "guard": "!g", "to": 4},
        {"from": 1, "guard": "!p & !s", "to": 0},
        {"from": 1, "guard": "p & !s", "to": 1},
        {"from": 1, "guard": "s & !p", "to": 2},
        {"from": 1, "guard": "p & s", "to": 3},
        {"from": 2, "guard": "b", "to": 4},
        {"from": 2, "guard": "!p", "to": 2},
        {"from": 2, "guard": "p", "to": 3},
        {"from": 3, "guard": "!g | b", "to": 4},
        {"from": 3, "guard": "!p", "to": 2},
        {"from": 3, "guard": "p", "to": 3},
        {"from": 4, "guard": "true", "to": 4},
    ],
}

SEED_FORMULA = "G(p -> X g) & G(s -> G !X b)"


# -- alphabet --------------------------------------------------------------

def test_alphabet_encoding_roundtrip():
    a = Alphabet.of("p", "q", "r")
    assert a.size == 8
    assert a.encode({"p", "r"}) == 0b101
    assert a.decode(0b101) == {"p", "r"}
    with pytest.raises(AlphabetMismatch):
        a.encode({"z"})


def test_alphabet_too_large():
    with pytest.raises(AlphabetTooLarge):
        Alphabet(tuple(f"x{i}" for i in range(17)))


def test_dfa_must_be_total():
    with pytest.raises(ValueError):
        Dfa(Alphabet.of("p"), ((0,),), 0, frozenset())


# -- compilation -----------------------------------------------------------

def test_compile_true_is_single_accepting_state():
    d = compile_ltlf(parse_formula("true"), SEED)
    assert d.n_states == 1 and d.finals == {0}
    assert all(t == 0 for t in d.delta[0])


def test_compile_finally_exhaustive():
    a = Alphabet.of("q")
    d = compile_ltlf(parse_formula("F q"), a)
    for n in range(1, 7):
        for trace in all_traces(["q"], n):
            assert accepts(d, trace) == any("q" in l for l in trace)


def test_compile_seed_formula_matches_hand_transcription():
    compiled = compile_ltlf(parse_formula(SEED_FORMULA), SEED)
    hand = from_json(SEED_CAUSAL)
    assert equivalent(compiled, hand)
    # four live states plus the trap
    assert compiled.n_states == 5
    for n in range(1, 7):
        assert np.array_equal(acceptance_table(compiled, n), acceptance_table(hand, n))


def test_compile_seed_formula_examples():
    d = compile_ltlf(parse_formula(SEED_FORMULA), SEED)
    assert accepts(d, [{"p"}, {"g"}])
    assert not accepts(d, [{"s"}, {"b"}])
    assert not accepts(d, [{"p"}, set()])


def test_compile_oracle_small_sample():
    rng = random.Random(11)
    props = ["p", "q"]
    a = Alphabet(tuple(props))
    for _ in range(20):
        f = random_formula(rng, props, 3)
        d = compile_ltlf(f, a)
        for n in range(1, 5):
            expected = [naive_holds(f, t) for t in all_traces(props, n)]
            assert acceptance_table(d, n).tolist() == expected, f


def test_compile_over_larger_alphabet_ignores_extra_props():
    f = parse_formula("p U q")
    small = compile_ltlf(f, Alphabet.of("p", "q"))
    big = compile_ltlf(f, Alphabet.of("p", "q", "r"))
    assert equivalent(lift(small, big.alphabet), big)


def test_compile_atom_outside_alphabet():
    with pytest.raises(AlphabetMismatch):
        compile_ltlf(parse_formula("z"), Alphabet.of("p"))


def test_compile_term_cap():
    # 11 atoms and 11 eventualities exceed the 22-term budget
    props = tuple(f"p{i}" for i in range(11))
    f = parse_formula(" & ".join(f"F {x}" for x in props))
    with pytest.raises(StateBlowup):
        compile_ltlf(f, Alphabet(props))


# -- product, complement, minimize ------------------------------------------

def _small_dfas(seed, n=30):
    rng = random.Random(seed)
    a = Alphabet.of("p", "q")
    return [random_dfa(rng, a, rng.randint(1, 4)) for _ in range(n)]


def test_product_language_is_intersection_exhaustive():
    dfas = _small_dfas(3)
    for x, y in zip(dfas[::2], dfas[1::2]):
        prod = product(x, y)
        for n in range(1, 7):
            assert np.array_equal(acceptance_table(prod, n),
                                  acceptance_table(x, n) & acceptance_table(y, n))


def test_product_identities():
    for d in _small_dfas(4, 10):
        assert equivalent(product(d, universal(d.alphabet)), d)
        assert equivalent(product(d, complement(d)), empty_language(d.alphabet))


def test_product_alphabet_mismatch():
    with pytest.raises(AlphabetMismatch):
        product(universal(Alphabet.of("p")), universal(Alphabet.of("q")))


def test_minimize_preserves_language_and_never_grows():
    rng = random.Random(9)
    for d in _small_dfas(5):
        m = minimize(d)
        assert m.n_states <= d.n_states
        for _ in range(1000 // 30 + 1):
            word = [rng.randrange(4) for _ in range(rng.randint(0, 8))]
            assert (run_dfa(m.delta, m.initial, word) in m.finals) == \
                   (run_dfa(d.delta, d.initial, word) in d.finals)


def test_minimize_merges_bisimilar_finals():
    a = Alphabet.of("p")
    d = Dfa(a, ((1, 2), (1, 1), (2, 2)), 0, frozenset({1, 2}))
    m = minimize(d)
    assert m.n_states == 2


def test_minimize_fixpoint_is_isomorphic():
    d = compile_ltlf(parse_formula("F p"), Alphabet.of("p"))
    assert d.n_states == 2
    assert minimize(d) == d


def test_determinism_structural():
    d = compile_ltlf(parse_formula(SEED_FORMULA), SEED)
    for row in d.delta:
        assert len(row) == SEED.size
        assert all(0 <= t < d.n_states for t in row)


# -- acceptance on the seed task --------------------------------------------

def test_seed_task_acceptance():
    task = from_json(SEED_TASK)
    assert accepts(task, [{"p"}, {"g"}])
    assert accepts(task, [{"s"}, {"b"}])
    assert not accepts(task, [{"s"}, set()])
    assert tuple(task.run([{"p"}, {"g"}]).states) == (0, 1, 3)
    assert task.step(0, SEED.encode({"p", "s"})) == 2
    assert not accepts(task, [])


# -- serialization ----------------------------------------------------------

def test_json_roundtrip_and_dot():
    d = compile_ltlf(parse_formula(SEED_FORMULA), SEED)
    data = to_json(d)
    json.dumps(data)
    assert equivalent(from_json(data), d)
    dot = to_dot(d)
    assert dot.startswith("digraph") and "doublecircle" in dot


def test_from_json_unmatched_letters_self_loop():
    d = from_json({"propositions": ["p"], "states": 2, "initial": 0, "finals": [1],
                   "transitions": [{"from": 0, "guard": "p", "to": 1}]})
    assert d.delta == ((0, 1), (1, 1))


# -- MDP skeleton -----------------------------------------------------------

def test_skeleton_single_edge():
    a = Alphabet.of("p")
    m = LabeledMdp(a, ("go",), [[((1.0, 1, 1),)], [((1.0, 1, 0),)]], 0)
    n = mdp_skeleton(m)
    assert n.successors(0, 1) == {1} and n.successors(0, 0) == frozenset()
    assert n.finals == {0, 1}


def test_skeleton_union_over_actions():
    case = build_seed_world()
    n = mdp_skeleton(case.mdp)
    home = 0
    letters = {l for l in range(n.alphabet.size) if n.successors(home, l)}
    assert {SEED.encode({"p"}), SEED.encode({"s"}), 0} <= letters


def test_skeleton_small_office_has_a_k1_e1_path():
    case = build_small_office()
    n = mdp_skeleton(case.mdp)
    # BFS on (state, progress) where progress counts a, k1, e1 seen in order
    targets = [n.alphabet.encode({x}) for x in ("a", "k1", "e1")]
    start = (n.initial, 0)
    seen, frontier = {start}, [start]
    while frontier:
        nxt = []
        for s, k in frontier:
            for letter in range(n.alphabet.size):
                for t in n.successors(s, letter):
                    k2 = k + 1 if k < 3 and letter == targets[k] else k
                    if (t, k2) not in seen:
                        seen.add((t, k2))
                        nxt.append((t, k2))
        frontier = nxt
    assert any(k == 3 for _, k in seen)
