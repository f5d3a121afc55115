import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_diff, rel_err
from rotrnn import ndcore as nd
from rotrnn.errors import ContractError, DataError, DimensionError
from rotrnn.layers import Embedding, broadcast_concat, dense, dropout, embed


def test_embedding_init_zeroes_padding_row(rng):
    emb = Embedding.init(10, 4, rng)
    assert not emb.table[0].any()
    assert np.all(np.abs(emb.table) <= 0.05)


def test_padding_ids_give_zero_rows(rng):
    tape = nd.Tape()
    table = tape.leaf(rng.normal(size=(6, 3)))
    out = embed(table, np.array([[0, 0]]))
    assert out.shape == (1, 2, 3) and not out.value.any()


@settings(max_examples=50, deadline=None)
@given(V=st.integers(2, 20), B=st.integers(1, 4), T=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_embed_matches_one_hot_matmul(V, B, T, seed):
    rng = np.random.default_rng(seed)
    table = rng.normal(size=(V, 5))
    table[0] = 0.0
    ids = rng.integers(0, V, size=(B, T))
    onehot = np.eye(V)[ids]
    out = embed(nd.Tape().leaf(table), ids).value
    assert np.max(np.abs(out - onehot @ table)) <= 1e-12


def test_embed_gradient_hits_one_row(rng):
    tape = nd.Tape()
    table = tape.leaf(rng.normal(size=(6, 3)))
    g = tape.backward(nd.total(embed(table, np.array([[3]]))))[table]
    expected = np.zeros((6, 3))
    expected[3] = 1.0
    assert np.array_equal(g, expected)


def test_embed_gradient_accumulates_repeats_and_skips_padding(rng):
    tape = nd.Tape()
    table = tape.leaf(rng.normal(size=(5, 2)))
    g = tape.backward(nd.total(embed(table, np.array([[0, 2, 2], [0, 0, 4]]))))[table]
    assert g[:, 0].tolist() == [0.0, 0.0, 2.0, 0.0, 1.0]


def test_embed_rejects_bad_ids(rng):
    table = nd.Tape().leaf(rng.normal(size=(5, 2)))
    with pytest.raises(DataError, match="7"):
        embed(table, np.array([[1, 7]]))
    with pytest.raises(DataError):
        embed(table, np.array([[-1]]))
    with pytest.raises(DataError):
        embed(table, np.array([[1.5]]))


def test_dropout_eval_and_zero_rate_are_identity(rng):
    x = nd.Tape().constant(rng.normal(size=(4, 5)))
    assert dropout(x, 0.3, train=False) is x
    assert dropout(x, 0.0, train=True, rng=rng) is x
    assert dropout(x, 0.0, train=False) is x


def test_dropout_survivor_fraction():
    x = nd.Tape().constant(np.ones((1000, 1000)))
    out = dropout(x, 0.3, train=True, rng=np.random.default_rng(5)).value
    dropped = float(np.mean(out == 0.0))
    assert abs(dropped - 0.3) <= 0.005
    assert np.allclose(out[out != 0.0], 1 / 0.7, rtol=0, atol=1e-15)


def test_dropout_preserves_expectation():
    x = np.linspace(-2.0, 3.0, 10)
    samples = nd.Tape().constant(np.broadcast_to(x, (100_000, 10)).copy())
    mean = dropout(samples, 0.3, train=True, rng=np.random.default_rng(8)).value.mean(axis=0)
    # 1e6 draws in total; each column mean is within 1% of |x| plus a small absolute slack near zero
    assert np.all(np.abs(mean - x) <= 0.01 * np.abs(x) + 0.01)


def test_dropout_contract_errors(rng):
    x = nd.Tape().constant(np.ones(3))
    with pytest.raises(ContractError):
        dropout(x, 1.0, train=True, rng=rng)
    with pytest.raises(ContractError):
        dropout(x, 0.3, train=True)


def test_dense_examples(rng):
    tape = nd.Tape()
    x = tape.constant(rng.normal(size=(3, 4)))
    assert np.array_equal(dense(tape.constant(np.eye(4)), tape.constant(np.zeros(4)), x).value, x.value)
    b = rng.normal(size=2)
    out = dense(tape.constant(rng.normal(size=(4, 2))), tape.constant(b), tape.constant(np.zeros((3, 4))))
    assert np.array_equal(out.value, np.tile(b, (3, 1)))
    with pytest.raises(DimensionError):
        dense(tape.constant(np.ones((5, 2))), tape.constant(np.zeros(2)), x)


def test_dense_gradient_check(rng):
    W, b, x = rng.normal(size=(4, 3)), rng.normal(size=3), rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 3))
    tape = nd.Tape()
    Wv, bv, xv = tape.leaf(W), tape.leaf(b), tape.leaf(x)
    grads = tape.backward(nd.total(nd.mul(dense(Wv, bv, xv), tape.constant(w))))
    f = lambda: float(np.sum((x @ W + b) * w))  # noqa: E731
    for var, arr in ((Wv, W), (bv, b), (xv, x)):
        assert rel_err(grads[var], central_diff(f, arr)) < 1e-7


def test_broadcast_concat_examples(rng):
    tape = nd.Tape()
    story = rng.normal(size=(2, 3, 4))
    out = broadcast_concat(tape.constant(np.zeros((2, 5))), tape.constant(story)).value
    assert np.array_equal(out[:, :, :4], story) and not out[:, :, 4:].any()
    q = rng.normal(size=(2, 5))
    one = broadcast_concat(tape.constant(q), tape.constant(story[:, :1])).value
    assert np.array_equal(one[:, 0], np.concatenate([story[:, 0], q], axis=1))


def test_broadcast_concat_gradient_fans_out(rng):
    tape = nd.Tape()
    q = tape.leaf(rng.normal(size=(2, 5)))
    s = tape.leaf(rng.normal(size=(2, 7, 4)))
    grads = tape.backward(nd.total(broadcast_concat(q, s)))
    assert np.array_equal(grads[q], np.full((2, 5), 7.0))
    assert np.array_equal(grads[s], np.ones((2, 7, 4)))


@settings(max_examples=30, deadline=None)
@given(B=st.integers(1, 3), T=st.integers(1, 6), d=st.integers(1, 5), q=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_broadcast_concat_slices_back(B, T, d, q, seed):
    rng = np.random.default_rng(seed)
    qv, sv = rng.normal(size=(B, q)), rng.normal(size=(B, T, d))
    tape = nd.Tape()
    out = broadcast_concat(tape.constant(qv), tape.constant(sv)).value
    assert np.array_equal(out[:, :, :d], sv)
    for t in range(T):
        assert np.array_equal(out[:, t, d:], qv)


def test_broadcast_concat_errors():
    tape = nd.Tape()
    with pytest.raises(DimensionError):
        broadcast_concat(tape.constant(np.zeros((3, 2))), tape.constant(np.zeros((2, 4, 1))))
    with pytest.raises(DimensionError):
        broadcast_concat(tape.constant(np.zeros((2, 2))), tape.constant(np.zeros((2, 4))))
