import random
from collections import deque

import pytest

from tlcd_rl.automata import (
    Alphabet, AlphabetMismatch, Dfa, compile_ltlf, complement, empty_language, equivalent,
    minimize, product, universal,
)
from tlcd_rl.causal import (
    Configuration, Verdict, check_compatibility, classify, classify_all,
)
from tlcd_rl.environments import (
    LabeledMdp, build_crossroad, build_large_office, build_seed_world, build_small_office,
)
from tlcd_rl.ltlf import parse_formula
from tlcd_rl.tlcd import parse_tlcd, to_causal_dfa

from oracles import brute_force_verdict, random_dfa

A2 = Alphabet.of("p", "q")


@pytest.fixture(scope="module")
def seed():
    case = build_seed_world()
    return case.task, to_causal_dfa(case.tlcd, case.mdp.alphabet)


def _product_pairs(task, causal, start):
    seen, queue = {start}, deque([start])
    while queue:
        t, c = queue.popleft()
        for letter in task.alphabet.letters():
            nxt = (task.delta[t][letter], causal.delta[c][letter])
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


# -- the seed walkthrough ---------------------------------------------------

def test_seed_walkthrough(seed):
    task, causal = seed
    assert classify(task, causal, (1, 1)).verdict is Verdict.ACCEPTING
    assert classify(task, causal, (2, 2)).verdict is Verdict.REJECTING
    assert classify(task, causal, (0, 0)).verdict is Verdict.NEITHER


def test_seed_walkthrough_reachable_causal_finals(seed):
    task, causal = seed
    from_planted = {x for x in _product_pairs(task, causal, (1, 1)) if x[1] in causal.finals}
    assert from_planted == {(3, 0), (3, 2)}
    from_sold = {x for x in _product_pairs(task, causal, (2, 2)) if x[1] in causal.finals}
    assert from_sold == {(2, 2)}
    assert classify(task, causal, (1, 1)).witness == {3}
    assert classify(task, causal, (2, 2)).witness == {2}


def test_seed_labels_lead_to_named_configurations(seed):
    task, causal = seed
    a = task.alphabet
    for label, expected in (({"p"}, (1, 1)), ({"s"}, (2, 2))):
        letter = a.encode(label)
        assert (task.delta[0][letter], causal.delta[0][letter]) == expected


def test_classify_all_consistent_with_classify(seed):
    task, causal = seed
    table = classify_all(task, causal)
    assert Configuration(0, 0) in table
    for cfg, verdict in table.items():
        assert verdict == classify(task, causal, cfg)
    assert table.codes()[1][1] == 1 and table.codes()[2][2] == -1 and table.codes()[0][0] == 0


def test_classify_all_is_cached(seed):
    task, causal = seed
    assert classify_all(task, causal) is classify_all(task, causal)


# -- oracles ---------------------------------------------------------------

def _random_pairs(seed, count):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        alphabet = A2 if rng.random() < 0.7 else Alphabet.of("p")
        nt = rng.randint(1, 3)
        nc = rng.randint(1, 6 // nt)
        out.append((random_dfa(rng, alphabet, nt), random_dfa(rng, alphabet, nc)))
    return out


def test_matches_brute_force_oracle():
    for task, causal in _random_pairs(1, 100):
        for t in range(task.n_states):
            for c in range(causal.n_states):
                got = classify(task, causal, (t, c))
                verdict, vacuous = brute_force_verdict(task, causal, (t, c))
                assert (got.verdict.value, got.vacuous) == (verdict, vacuous)


def test_matches_language_inclusion_construction():
    for task, causal in _random_pairs(2, 60):
        for t in range(task.n_states):
            for c in range(causal.n_states):
                lc, lt = causal.with_initial(c), task.with_initial(t)
                empty = empty_language(task.alphabet)
                included = equivalent(product(lc, complement(lt)), empty)
                disjoint = equivalent(product(lc, lt), empty)
                got = classify(task, causal, (t, c))
                if got.vacuous:
                    assert included and disjoint
                elif got.verdict is Verdict.ACCEPTING:
                    assert included and not disjoint
                elif got.verdict is Verdict.REJECTING:
                    assert disjoint and not included
                else:
                    assert not included and not disjoint


def test_universal_causal_reduces_to_task_reachability():
    rng = random.Random(4)
    for _ in range(30):
        task = random_dfa(rng, A2, rng.randint(1, 5))
        causal = universal(A2)
        for t in range(task.n_states):
            reach = set(task.reachable(t))
            verdict = classify(task, causal, (t, 0)).verdict
            if reach <= task.finals:
                assert verdict is Verdict.ACCEPTING
            elif not reach & task.finals:
                assert verdict is Verdict.REJECTING
            else:
                assert verdict is Verdict.NEITHER


def test_universal_task_accepts_wherever_causal_final_reachable():
    rng = random.Random(6)
    task = universal(A2)
    for _ in range(30):
        causal = random_dfa(rng, A2, rng.randint(1, 5))
        for c in range(causal.n_states):
            got = classify(task, causal, (0, c))
            if set(causal.reachable(c)) & causal.finals:
                assert got.verdict is Verdict.ACCEPTING and not got.vacuous
            else:
                assert got.vacuous


def test_never_both_unless_vacuous():
    for task, causal in _random_pairs(8, 50):
        for cfg, c in classify_all(task, causal).items():
            witness = c.witness
            both = witness <= task.finals and not witness & task.finals
            assert both == c.vacuous


def test_vacuous_configuration_reported_rejecting():
    task = universal(A2)
    causal = empty_language(A2)
    c = classify(task, causal, (0, 0))
    assert c.verdict is Verdict.REJECTING and c.vacuous and not c.witness


def test_alphabet_mismatch():
    with pytest.raises(AlphabetMismatch):
        classify(universal(A2), universal(Alphabet.of("p")), (0, 0))


# -- runtime guard ---------------------------------------------------------

def test_edge_visits_bound_seed(seed):
    task, causal = seed
    table = classify_all(task, causal)
    bound = task.alphabet.size * task.n_states * causal.n_states
    assert bound == 16 * 4 * 5
    for cfg in table:
        assert table.edge_visits[cfg] <= bound
    # the searches only ever touch reachable pairs, so the tighter count holds too
    assert max(table.edge_visits.values()) <= 16 * 4 * 3


def test_edge_visits_universal_causal_exact():
    a = A2
    task = Dfa(a, ((1, 1, 2, 0), (2, 1, 1, 0), (0, 2, 1, 1)), 0, frozenset({2}))
    table = classify_all(task, universal(a))
    for cfg in table:
        assert table.edge_visits[cfg] == a.size * task.n_states


def test_edge_visits_bound_random():
    rng = random.Random(12)
    for _ in range(100):
        task, causal = random_dfa(rng, A2, 5), random_dfa(rng, A2, 5)
        table = classify_all(task, causal)
        bound = A2.size * task.n_states * causal.n_states
        assert all(v <= bound for v in table.edge_visits.values())


# -- minimization invariance -------------------------------------------------

def _words_to_states(d: Dfa):
    words = {d.initial: []}
    queue = deque([d.initial])
    while queue:
        q = queue.popleft()
        for letter in d.alphabet.letters():
            t = d.delta[q][letter]
            if t not in words:
                words[t] = words[q] + [letter]
                queue.append(t)
    return words


def _run(d, word):
    q = d.initial
    for letter in word:
        q = d.delta[q][letter]
    return q


def test_classification_invariant_under_minimize():
    rng = random.Random(21)
    for _ in range(40):
        task, causal = random_dfa(rng, A2, 4), random_dfa(rng, A2, 4)
        mt, mc = minimize(task), minimize(causal)
        tw, cw = _words_to_states(task), _words_to_states(causal)
        for t, wt in tw.items():
            for c, wc in cw.items():
                original = classify(task, causal, (t, c)).verdict
                mapped = classify(mt, mc, (_run(mt, wt), _run(mc, wc))).verdict
                assert original is mapped


# -- compatibility ----------------------------------------------------------

@pytest.mark.parametrize("build", [build_small_office, build_large_office, build_crossroad,
                                   build_seed_world])
def test_case_studies_compatible(build):
    case = build()
    assert check_compatibility(case.mdp, to_causal_dfa(case.tlcd, case.mdp.alphabet))


def test_no_finals_fails_at_initial_state():
    case = build_small_office()
    result = check_compatibility(case.mdp, empty_language(case.mdp.alphabet))
    assert not result
    assert result.counterexample == (case.mdp.initial, 0)


def test_single_state_self_loop_with_never_p():
    a = Alphabet.of("p")
    m = LabeledMdp(a, ("stay",), [[((1.0, 0, 0),)]], 0)
    assert check_compatibility(m, compile_ltlf(parse_formula("G !p"), a))


def test_unemitted_proposition_compatible_iff_finals_reachable():
    case = build_small_office()
    a = Alphabet(case.mdp.alphabet.propositions + ("z",))
    m = LabeledMdp(a, case.mdp.actions, case.mdp.transitions, case.mdp.initial)
    # z never fires, so a z-caused constraint never leaves the final state
    assert check_compatibility(m, to_causal_dfa(parse_tlcd("z => G !e1", a), a))
    # demanding z after k1 strands every run that picks up k1
    assert not check_compatibility(m, to_causal_dfa(parse_tlcd("k1 => F z", a), a))


def test_foreclosed_effect_is_incompatible():
    case = build_small_office()
    a = case.mdp.alphabet
    # room 3 has no way back to e2, while e2 -> k2 stays possible
    assert not check_compatibility(case.mdp, to_causal_dfa(parse_tlcd("k2 => F e2", a), a))
    assert check_compatibility(case.mdp, to_causal_dfa(parse_tlcd("e2 => F k2", a), a))
