import numpy as np
import pytest

from vlhmm.context_tree import ContextTree, block_transitions
from vlhmm.sequences import SymbolSequence
from vlhmm.vlmc import VlmcModel, empirical_transitions, sample_vlmc, stationary_distribution, successor_to_dense


def test_model_rejects_bad_trees():
    with pytest.raises(ValueError):
        VlmcModel(ContextTree(2, [(0,), (1,)]))
    with pytest.raises(ValueError):
        VlmcModel(ContextTree(2, [(0,)], [[0.5, 0.5]]))


def test_sampling_is_deterministic(scenario1_tree):
    m = VlmcModel(scenario1_tree)
    assert sample_vlmc(m, 500, 7) == sample_vlmc(m, 500, 7)
    assert sample_vlmc(m, 500, 7) != sample_vlmc(m, 500, 8)


def test_empirical_transitions_match_source(scenario1_tree):
    x = sample_vlmc(VlmcModel(scenario1_tree), 100_000, 1)
    est = empirical_transitions(x, 3)
    assert np.max(np.abs(est - block_transitions(scenario1_tree, 3))) < 0.02


def test_empirical_transitions_unseen_rows_uniform():
    est = empirical_transitions(SymbolSequence([0] * 10, 2), 2)
    assert np.allclose(est[0], [1.0, 0.0])
    assert np.allclose(est[1:], 0.5)
    with pytest.raises(ValueError):
        empirical_transitions(SymbolSequence([0, 1], 2), 2)


def test_deterministic_chain_is_periodic():
    tree = ContextTree(2, [(0,), (1,)], [[0.0, 1.0], [1.0, 0.0]])
    x = sample_vlmc(VlmcModel(tree, burn_in=0), 20, 0)
    assert np.all(np.diff(x.as_int64()) != 0)


def test_stationary_distribution(scenario1_tree):
    P = successor_to_dense(block_transitions(scenario1_tree, 3), 2)
    pi = stationary_distribution(P)
    assert np.allclose(pi @ P, pi, atol=1e-10)
    x = sample_vlmc(VlmcModel(scenario1_tree), 200_000, 3).as_int64()
    assert abs((x == 0).mean() - pi[0::2].sum()) < 0.01


def test_stationary_periodic_and_reducible():
    assert np.allclose(stationary_distribution(np.array([[0.0, 1.0], [1.0, 0.0]])), 0.5)
    with pytest.raises(ValueError):
        stationary_distribution(np.eye(2))
