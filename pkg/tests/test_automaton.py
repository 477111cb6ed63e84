import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchstab.automaton import (
    Automaton,
    Cycle,
    EdgeNotFound,
    EnumerationBudgetExceeded,
    accepts,
    accepts_cycle,
    closed_walks,
    count_words,
    cycles_k,
    edge_shift,
    entropy,
    format_word,
    is_irreducible,
    is_right_resolving,
    lift,
    parse_word,
    perron_root,
    remove_edge,
    validate_and_trim,
    words_k,
)
from switchstab.models import figure4_fixture, no_k_run_language

from conftest import random_automaton

GOLDEN = (1 + math.sqrt(5)) / 2


def golden_mean():
    # no two consecutive 1s
    return Automaton(2, ("a", "b"), (("a", "a", 2), ("a", "b", 1), ("b", "a", 2)))


def brute_words(g, k):
    """Words of length k carried by some path, by enumerating paths directly."""
    out = set()
    for start in g.nodes:
        paths = [((), start)]
        for _ in range(k):
            paths = [(w + (l,), d) for w, v in paths for _, d, l in g.out_edges[v]]
        out.update(w for w, _ in paths)
    return out


# -- construction ----------------------------------------------------------


def test_canonical_form_and_validation():
    g = Automaton(2, ("b", "a"), (("b", "a", 1), ("a", "b", 2), ("a", "b", 2)))
    assert g.nodes == ("a", "b")
    assert g.edges == (("a", "b", 2), ("b", "a", 1))
    with pytest.raises(ValueError):
        Automaton(2, ("a",), (("a", "a", 3),))
    with pytest.raises(ValueError):
        Automaton(2, ("a",), (("a", "z", 1),))


def test_json_round_trip(rng):
    for _ in range(20):
        g = random_automaton(rng)
        assert Automaton.from_json(json.loads(json.dumps(g.to_json()))) == g
    with pytest.raises(ValueError):
        Automaton.from_json({"schema": "automaton/9", "m": 1, "nodes": [], "edges": []})


def test_word_formatting():
    assert format_word((3, 2, 6, 4, 5)) == "32645"
    assert parse_word("32645") == (3, 2, 6, 4, 5)
    assert parse_word(format_word((12, 3))) == (12, 3)


# -- trimming --------------------------------------------------------------


def test_trim_examples():
    g = Automaton(2, ("q",), (("q", "q", 1), ("q", "q", 2)))
    assert validate_and_trim(g) == g
    path = Automaton(1, ("a", "b"), (("a", "b", 1),))
    assert validate_and_trim(path).is_empty


def test_trim_figure4_minus_first_edge():
    g = remove_edge(figure4_fixture(), ("v1", "v2", 2))
    assert "v1" not in g.nodes
    # only infinite tails of 2s or of 3s remain
    assert accepts(g, (2,) * 10) and accepts(g, (3,) * 10)
    assert accepts(g, (2, 2, 3, 3)) and not accepts(g, (3, 2))


def test_trim_result_satisfies_degree_condition(rng):
    for _ in range(50):
        g = random_automaton(rng)
        e = g.edges[rng.integers(len(g.edges))]
        h = remove_edge(g, e)
        srcs = {s for s, _, _ in h.edges}
        dsts = {d for _, d, _ in h.edges}
        assert set(h.nodes) == srcs == dsts


def test_remove_missing_edge():
    with pytest.raises(EdgeNotFound):
        remove_edge(Automaton.full_shift(2), ("q", "q", 9))


# -- acceptance and enumeration --------------------------------------------


def test_accepts_examples():
    assert accepts(Automaton.full_shift(2), (1, 2, 1))
    assert accepts(figure4_fixture(), (2, 3, 4))
    assert not accepts(golden_mean(), (1, 1))


def test_adaptive_solver_word_is_accepted():
    # modes: 1=(fe,0.001) 2=(fe,0.002) 3=(md,0.002); the step may only
    # double after a Forward Euler step and never shrink
    g = Automaton(3, ("small", "big"), (
        ("small", "small", 1), ("small", "big", 2), ("big", "big", 2), ("big", "big", 3),
    ))
    assert accepts(g, (1, 2, 3))
    assert not accepts(g, (3, 1))


def test_words_k_examples():
    assert len(words_k(Automaton.full_shift(2), 3)) == 8
    assert len(words_k(golden_mean(), 4)) == 8
    assert words_k(Automaton(2, (), ()), 3) == set()


def test_words_k_budget():
    with pytest.raises(EnumerationBudgetExceeded):
        words_k(Automaton.full_shift(4), 20, budget=10**6)


def test_words_match_brute_force(rng):
    for _ in range(40):
        g = random_automaton(rng, max_nodes=4)
        for k in range(5):
            ws = words_k(g, k)
            assert ws == brute_words(g, k)
            assert count_words(g, k) == len(ws)


def test_subword_closure_and_extension(rng):
    for _ in range(30):
        g = random_automaton(rng, max_nodes=4)
        w5 = words_k(g, 5)
        w4 = words_k(g, 4)
        for w in w5:
            for i, j in itertools.combinations(range(6), 2):
                assert accepts(g, w[i:j])
        # every length-4 word extends to length 5
        assert {w[:4] for w in w5} == w4


def test_cycles_k_examples():
    assert [c.word for c in cycles_k(Automaton.full_shift(2), 1)] == [(1,), (2,)]
    assert (2, 3, 4) in {c.word for c in cycles_k(figure4_fixture(), 3)}


def test_cycles_after_removing_middle_edge():
    g = remove_edge(figure4_fixture(), ("v2", "v3", 3))
    simple = set()
    for k in range(1, 4):
        for c in cycles_k(g, k):
            if len(set(c.nodes[:-1])) == len(c):
                simple.add(tuple(sorted(c.word)))
    assert simple == {(2,), (3,), (1, 2)}


def test_cycles_are_anchored_closed_walks(rng):
    for _ in range(20):
        g = random_automaton(rng, max_nodes=4)
        for k in (1, 2, 3):
            cs = cycles_k(g, k)
            assert len({(c.nodes[0], c.word) for c in cs}) == len(cs)
            for c in cs:
                assert c.is_realized_in(g)
                assert accepts_cycle(g, c.word)
                assert accepts(g, c.word * 3)


def test_closed_walks_and_cycle_validation():
    g = figure4_fixture()
    walks = closed_walks(g, (2, 3, 4))
    assert [c.nodes for c in walks] == [("v1", "v2", "v3", "v1")]
    with pytest.raises(ValueError):
        Cycle((1, 2), ("a", "b", "c"))


# -- lift ------------------------------------------------------------------


def test_lift_examples():
    g = Automaton.full_shift(2)
    g1 = lift(g, 1)
    assert len(g1.nodes) == 2 and len(g1.edges) == 4
    assert lift(g, 0) == g
    assert lift(figure4_fixture(), 0) == figure4_fixture()


def test_lift_preserves_language(rng):
    for _ in range(100):
        g = random_automaton(rng, max_nodes=6, max_m=3, density=0.25)
        for k in (1, 2, 3):
            try:
                gk = lift(g, k, node_cap=5000)
            except EnumerationBudgetExceeded:
                continue
            for i in range(7):
                assert count_words(g, i) == count_words(gk, i)
            for i in range(4):
                assert words_k(g, i) == words_k(gk, i)


def test_lift_preserves_perron_root(rng):
    for _ in range(20):
        g = random_automaton(rng, max_nodes=4)
        assert perron_root(lift(g, 2)) == pytest.approx(perron_root(g), rel=1e-8)


def test_lift_of_right_resolving_is_right_resolving(rng):
    for _ in range(30):
        g = random_automaton(rng, max_nodes=4, right_resolving=True)
        assert is_right_resolving(g)
        for k in (1, 2):
            assert is_right_resolving(lift(g, k))


def test_lift_node_cap():
    with pytest.raises(EnumerationBudgetExceeded):
        lift(Automaton.full_shift(8), 5, node_cap=1000)


# -- structure and entropy ---------------------------------------------------


def test_right_resolving_examples():
    assert is_right_resolving(Automaton.full_shift(2))
    assert not is_right_resolving(Automaton(1, ("a", "b"), (("a", "a", 1), ("a", "b", 1), ("b", "a", 1))))


def test_irreducible_examples():
    assert is_irreducible(Automaton.full_shift(2))
    assert not is_irreducible(Automaton(1, ("a", "b"), (("a", "a", 1), ("b", "b", 1))))
    assert is_irreducible(figure4_fixture())


def test_edge_shift_examples():
    g = Automaton(1, ("q",), (("q", "q", 1),))
    es = edge_shift(g)
    assert len(es.nodes) == 1 and len(es.edges) == 1
    f = figure4_fixture()
    assert len(edge_shift(f).nodes) == len(f.edges)


def test_edge_shift_entropy(rng):
    for _ in range(30):
        g = random_automaton(rng, max_nodes=4, right_resolving=True)
        assert entropy(edge_shift(g), warn=False) == pytest.approx(entropy(g), abs=1e-9)


def test_entropy_examples():
    for m in (1, 2, 3, 5):
        assert entropy(Automaton.full_shift(m)) == pytest.approx(math.log2(m), abs=1e-12)
    assert entropy(Automaton(2, (), ())) == 0.0
    assert entropy(golden_mean()) == pytest.approx(math.log2(GOLDEN), abs=1e-12)


def test_entropy_without_unstable_self_loops():
    g = Automaton.full_shift(8)
    for l in (2, 3, 4):
        g = remove_edge(g, ("q", "q", l))
    assert perron_root(g) == pytest.approx(5.0, abs=1e-9)
    assert entropy(g) == pytest.approx(math.log2(5), abs=1e-12)


def test_entropy_warns_when_not_right_resolving():
    g = Automaton(1, ("a", "b"), (("a", "a", 1), ("a", "b", 1), ("b", "a", 1)))
    with pytest.warns(RuntimeWarning):
        entropy(g)


def test_no_k_run_family():
    hs = [entropy(no_k_run_language(k)) for k in range(2, 21)]
    assert all(a < b for a, b in zip(hs, hs[1:]))
    assert hs[0] == pytest.approx(math.log2(GOLDEN), abs=1e-9)
    assert hs[-1] > 0.999


def test_entropy_matches_word_growth():
    for g in (golden_mean(), figure4_fixture(), no_k_run_language(4)):
        assert math.log2(count_words(g, 20)) / 20 == pytest.approx(entropy(g), abs=0.05)


def test_removal_never_increases_entropy(rng):
    for _ in range(60):
        g = random_automaton(rng)
        h = perron_root(g)
        for e in g.edges:
            assert perron_root(remove_edge(g, e)) <= h + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_language_shrinks_under_removal(seed):
    r = np.random.default_rng(seed)
    g = random_automaton(r, max_nodes=4)
    h = remove_edge(g, g.edges[r.integers(len(g.edges))])
    for k in range(5):
        assert words_k(h, k) <= words_k(g, k)
