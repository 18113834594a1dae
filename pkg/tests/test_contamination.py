import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlhmm.context_tree import InitialLaw
from vlhmm.contamination import NoiseSpec, Regime, brute_force_likelihood, contaminate, emission_matrix
from vlhmm.sequences import SymbolSequence
from vlhmm.vlmc import VlmcModel, sample_vlmc


def test_scalar_sum_binary():
    B = emission_matrix(NoiseSpec.scalar("sum", 0.1))
    assert np.allclose(B, [[0.9, 0.1], [0.1, 0.9]])


def test_scalar_product_binary():
    B = emission_matrix(NoiseSpec.scalar("product", 0.2))
    # zero stays zero; a one is zeroed with probability eps
    assert np.allclose(B, [[1.0, 0.0], [0.2, 0.8]])


def test_product_needs_table_beyond_binary():
    with pytest.raises(ValueError):
        emission_matrix(NoiseSpec.scalar("product", 0.1, 3))
    table = [[0, 0, 0], [0, 1, 2], [0, 2, 1]]
    B = emission_matrix(NoiseSpec.scalar("product", 0.1, 3, table))
    assert np.allclose(B.sum(axis=1), 1.0)


def test_weights_validated():
    with pytest.raises(ValueError):
        NoiseSpec(Regime.SUM, (0.5, 0.6))


@given(st.floats(0, 1), st.sampled_from(["sum", "product"]))
def test_emission_rows_stochastic(eps, regime):
    B = emission_matrix(NoiseSpec.scalar(regime, eps))
    assert np.allclose(B.sum(axis=1), 1.0)


def test_zero_noise_is_identity(scenario1_tree):
    x = sample_vlmc(VlmcModel(scenario1_tree), 1000, 0)
    for regime in Regime:
        assert contaminate(x, NoiseSpec.scalar(regime, 0.0), 5) == x


def test_flip_rate(scenario1_tree):
    x = sample_vlmc(VlmcModel(scenario1_tree), 50_000, 0)
    z = contaminate(x, NoiseSpec.scalar("sum", 0.2), 1)
    assert abs((x.as_int64() != z.as_int64()).mean() - 0.2) < 0.01


def test_brute_force_no_noise_iid():
    from vlhmm.context_tree import ContextTree

    tree = ContextTree(2, [()], [[0.3, 0.7]])
    z = SymbolSequence([0, 1, 1, 0], 2)
    ll = brute_force_likelihood(z, tree, InitialLaw({(0,): 0.3, (1,): 0.7}), NoiseSpec.scalar("sum", 0.0))
    assert ll == pytest.approx(math.log(0.3 ** 2 * 0.7 ** 2))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=3, max_size=7), st.floats(0.01, 0.49))
def test_brute_force_sums_to_one(_, eps):
    from itertools import product

    from vlhmm.context_tree import ContextTree

    tree = ContextTree(2, [(0,), (1,)], [[0.2, 0.8], [0.6, 0.4]])
    noise = NoiseSpec.scalar("sum", eps)
    init = InitialLaw.uniform(2, 1)
    total = sum(math.exp(brute_force_likelihood(SymbolSequence(z, 2), tree, init, noise)) for z in product([0, 1], repeat=4))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_brute_force_guard(scenario1_tree):
    with pytest.raises(ValueError):
        brute_force_likelihood(SymbolSequence([0] * 13, 2), scenario1_tree, InitialLaw.uniform(2, 3), NoiseSpec.scalar("sum", 0.1))
