import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlhmm.contamination import NoiseSpec
from vlhmm.context_tree import InitialLaw
from vlhmm.embedding import (
    HmmParams,
    Mode,
    decode_block,
    embed_emissions,
    embed_observations,
    embed_tree,
    encode_block,
    successor,
)
from vlhmm.sequences import SymbolSequence


@given(st.lists(st.integers(0, 2), min_size=1, max_size=5))
def test_block_code_roundtrip(block):
    assert decode_block(encode_block(block, 3), len(block), 3) == tuple(block)


def test_successor_drops_oldest():
    # 110 followed by 1 gives 101
    assert successor(encode_block((1, 1, 0), 2), 1, 2, 3) == encode_block((1, 0, 1), 2)


def test_embed_tree_rows(scenario1_tree):
    trans = embed_tree(scenario1_tree, 4)
    assert trans.shape == (16, 2)
    assert np.allclose(trans.sum(axis=1), 1.0)
    assert trans[encode_block((0, 1, 1, 0), 2), 0] == pytest.approx(0.87)


def test_dense_matrix_has_two_nonzeros_per_row(scenario1_tree):
    p = HmmParams.from_model(scenario1_tree, NoiseSpec.scalar("sum", 0.1), 3)
    dense = p.dense_transitions()
    assert dense.shape == (8, 8)
    assert np.all((dense > 0).sum(axis=1) == 2)
    assert np.allclose(dense.sum(axis=1), 1.0)


def test_emissions_symbol_and_block():
    noise = NoiseSpec.scalar("sum", 0.1)
    sym = embed_emissions(noise, 3, Mode.SYMBOL)
    assert sym.shape == (8, 2)
    assert np.allclose(sym[encode_block((0, 0, 1), 2)], [0.1, 0.9])
    blk = embed_emissions(noise, 2, Mode.BLOCK)
    assert blk.shape == (4, 4)
    assert blk[0, 3] == pytest.approx(0.01)
    assert np.allclose(blk.sum(axis=1), 1.0)


def test_embed_observations():
    z = SymbolSequence([0, 1, 1, 0, 1], 2)
    obs = embed_observations(z, 3, Mode.SYMBOL)
    assert obs.values.tolist() == [1, 0, 1]
    assert obs.head == (0, 1, 1)
    blk = embed_observations(z, 3, Mode.BLOCK)
    assert blk.values.tolist() == [3, 6, 5]
    with pytest.raises(ValueError):
        embed_observations(z, 6)


def test_params_checks_and_json(tmp_path, scenario2_tree):
    p = HmmParams.from_model(scenario2_tree, NoiseSpec.scalar("product", 0.2), 4, initial=InitialLaw.uniform(2, 4))
    assert p.check() == []
    path = tmp_path / "p.json"
    p.save(path)
    back = HmmParams.load(path)
    assert np.array_equal(back.trans, p.trans) and np.array_equal(back.emis, p.emis)
    with pytest.raises(ValueError):
        HmmParams(2, 2, "symbol", np.ones((4, 3)), p.emis[:4], np.full(4, 0.25), p.head_emission)


def test_emission_table_head(scenario1_tree):
    p = HmmParams.from_model(scenario1_tree, NoiseSpec.scalar("sum", 0.1), 3)
    obs = embed_observations(SymbolSequence([0, 0, 0, 1], 2), 3)
    e = p.emission_table(obs)
    assert e[0, 0] == pytest.approx(0.9 ** 3)
    assert e[1, 1] == pytest.approx(0.9)
    after = p.replace(head="after_k").emission_table(obs)
    assert np.all(after[0] == 1.0)
