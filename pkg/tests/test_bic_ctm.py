import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlhmm.bic_ctm import (
    BootstrapConfig,
    bootstrap_sample,
    count_contexts,
    ctm_prune,
    default_depth,
    exhaustive_bic,
    ml_term,
    penalized_term,
)
from vlhmm.context_tree import block_transitions
from vlhmm.sequences import SymbolSequence, count_pattern
from vlhmm.vlmc import VlmcModel, empirical_transitions, sample_vlmc

binary = st.lists(st.integers(0, 1), min_size=12, max_size=200)


def test_bootstrap_config_guards():
    with pytest.raises(ValueError):
        BootstrapConfig(m=10, D=0)
    with pytest.raises(ValueError):
        BootstrapConfig(m=3, D=3)


def test_ml_term_values():
    x = SymbolSequence([0, 1, 0, 1, 0, 0, 0, 1], 2)
    # every counted 1 is followed by 0; the 0s are followed by (0, 0, 1, 1, 1)
    assert ml_term(x, (1,)) == pytest.approx(0.0)
    assert ml_term(x, (0,)) == pytest.approx(2 * math.log(2 / 5) + 3 * math.log(3 / 5))
    assert ml_term(SymbolSequence([0, 0, 0, 1, 0], 2), (0,)) == pytest.approx(2 * math.log(2 / 3) + math.log(1 / 3))
    assert ml_term(SymbolSequence([0, 0, 0, 0, 1], 2), ()) == pytest.approx(4 * math.log(4 / 5) + math.log(1 / 5))
    assert ml_term(x, (1, 1)) == 0.0


def test_penalized_term():
    x = SymbolSequence([0, 1] * 4, 2)
    assert penalized_term(x, (1, 1), m=math.e ** 2) == pytest.approx(-1.0)
    assert penalized_term(x, (0,), m=100) == pytest.approx(ml_term(x, (0,)) - 0.5 * math.log(100))


@settings(max_examples=30, deadline=None)
@given(binary, st.integers(1, 4))
def test_count_tables_match_pattern_counts(seq, D):
    x = SymbolSequence(seq, 2)
    counts = count_contexts(x, D)
    for length in range(D + 1):
        for code in range(2 ** length):
            ctx = tuple((code >> (length - 1 - i)) & 1 for i in range(length))
            for a in (0, 1):
                assert counts.count(ctx, a) == count_pattern(x, ctx, a, offset=D)


def test_default_depth():
    assert default_depth(10_000, 2) == 6
    assert default_depth(16, 2) == 2
    assert default_depth(16, 2, override=9) == 9
    with pytest.raises(ValueError):
        default_depth(3, 2)


@settings(max_examples=60, deadline=None)
@given(binary, st.integers(1, 4))
def test_ctm_matches_exhaustive(seq, D):
    x = SymbolSequence(seq, 2)
    res = ctm_prune(x, D)
    tree, score = exhaustive_bic(x, D)
    assert res.tree.context_set == tree.context_set
    assert res.bic_score == pytest.approx(score, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(binary, st.integers(1, 4))
def test_pruned_contexts_are_seen_and_suffix_free(seq, D):
    x = SymbolSequence(seq, 2)
    res = ctm_prune(x, D)
    counts = count_contexts(x, D)
    ctxs = res.tree.contexts
    assert all(counts.count(c) >= 1 for c in ctxs)
    for c in ctxs:
        assert not any(d != c and c[len(c) - len(d):] == d for d in ctxs if len(d) <= len(c))
    assert res.node_values[()] == pytest.approx(-res.bic_score)


def test_iid_gives_root():
    rng = np.random.default_rng(0)
    x = SymbolSequence(rng.integers(0, 2, 10_000), 2)
    assert ctm_prune(x, 6).tree.context_set == {()}
    short = [SymbolSequence(rng.integers(0, 2, 20), 2) for _ in range(50)]
    assert sum(exhaustive_bic(x, 2)[0].context_set == {()} for x in short) >= 35


def test_constant_and_alternating_samples():
    assert ctm_prune(SymbolSequence([1] * 50, 2), 3).tree.context_set == {()}
    alt = SymbolSequence([0, 1] * 30, 2)
    assert exhaustive_bic(alt, 3)[0].context_set == {(0,), (1,)}
    assert ctm_prune(alt, 3).tree.context_set == {(0,), (1,)}


def test_exhaustive_guards():
    with pytest.raises(ValueError):
        exhaustive_bic(SymbolSequence([0, 1, 2] * 5, 3), 2)
    with pytest.raises(ValueError):
        exhaustive_bic(SymbolSequence([0, 1] * 10, 2), 5)


def test_ctm_recovers_scenario_tree(scenario1_tree):
    hits = sum(
        ctm_prune(sample_vlmc(VlmcModel(scenario1_tree), 30_000, s), 5).tree.context_set == scenario1_tree.context_set
        for s in range(10)
    )
    assert hits >= 9


def test_bootstrap_reproduces_chain(scenario1_tree):
    trans = block_transitions(scenario1_tree, 3)
    pi = np.full(8, 1 / 8)
    xb = bootstrap_sample(trans, pi, BootstrapConfig(m=100_000, D=3, seed=4))
    assert len(xb) == 100_000
    assert np.max(np.abs(empirical_transitions(xb, 3) - trans)) < 0.02
    assert xb == bootstrap_sample(trans, pi, 100_000, seed=4)


def test_bootstrap_deterministic_chain_is_periodic():
    trans = np.array([[0.0, 1.0], [1.0, 0.0]])
    xb = bootstrap_sample(trans, np.array([1.0, 0.0]), 10, seed=0)
    assert xb.as_int64().tolist() == [0, 1] * 5


def test_bootstrap_rejects_bad_tables():
    with pytest.raises(ValueError):
        bootstrap_sample(np.array([[0.5, 0.6], [0.5, 0.5]]), np.array([0.5, 0.5]), 10)
    with pytest.raises(ValueError):
        bootstrap_sample(np.full((3, 2), 0.5), np.full(3, 1 / 3), 10)
