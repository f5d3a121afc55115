import numpy as np
import pytest

from oracles import central_diff, rel_err
from rotrnn.babi_data import build_vocab, max_lengths, parse_task_file, vectorize
from rotrnn.cells import CellKind
from rotrnn.errors import ConfigError, DataError, DimensionError
from rotrnn.model import ModelConfig, QAModel, build_model, expected_shapes, forward, loss_and_grads, predict
from rotrnn.optim import AdamState, adam_update

TOY = """1 Mary went to the kitchen.
2 Where is Mary? \tkitchen\t1
1 John went to the garden.
2 Where is John? \tgarden\t1
"""


@pytest.fixture(scope="module")
def toy():
    stories = parse_task_file(TOY)
    vocab, _ = build_vocab(stories)
    s_len, q_len = max_lengths(stories)
    return vocab, vectorize(stories, vocab, s_len + 1, q_len)


def _model(kind, vocab_size, n=4, emb=3, dropout=0.3, seed=0, **kw):
    cfg = ModelConfig(kind, n, vocab_size, emb, emb, dropout, **kw)
    return build_model(cfg, np.random.default_rng(seed))


def _random_ids(rng, V, B, T):
    ids = rng.integers(1, V, size=(B, T))
    ids[:, 0] = 0
    return ids


@pytest.mark.parametrize("kind", ["lstm", "rotlstm", "gru", "rotgru"])
def test_batching_invariance(kind, rng):
    m = _model(kind, 12, n=6)
    s, q = _random_ids(rng, 12, 2, 7), _random_ids(rng, 12, 2, 3)
    both = forward(m, s, q).value
    for i in range(2):
        assert np.max(np.abs(forward(m, s[i:i + 1], q[i:i + 1]).value - both[i:i + 1])) < 1e-10


def test_eval_forward_is_deterministic(rng):
    m = _model("rotlstm", 12, n=6)
    s, q = _random_ids(rng, 12, 3, 7), _random_ids(rng, 12, 3, 3)
    assert forward(m, s, q).value.tobytes() == forward(m, s, q).value.tobytes()


def test_train_mode_needs_rng_and_varies(rng):
    m = _model("lstm", 12, n=6)
    s, q = _random_ids(rng, 12, 3, 7), _random_ids(rng, 12, 3, 3)
    a = forward(m, s, q, train=True, rng=np.random.default_rng(1)).value
    b = forward(m, s, q, train=True, rng=np.random.default_rng(2)).value
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("kind", ["lstm", "rotlstm", "gru", "rotgru"])
def test_end_to_end_gradients(kind, toy):
    vocab, (S, Q, A) = toy
    m = _model(kind, len(vocab), n=4, emb=3, seed=2)
    for k, v in m.params.items():
        if k.rsplit(".", 1)[-1].startswith("b"):
            v += np.random.default_rng(3).normal(0.0, 0.3, size=v.shape)
    _, grads, _ = loss_and_grads(m, S, Q, A, train=False)
    for name, arr in m.params.items():
        numeric = central_diff(lambda: loss_and_grads(m, S, Q, A, train=False)[0], arr)
        if name.endswith("_emb"):
            # padding rows are frozen by construction
            assert not grads[name][0].any()
            numeric[0] = 0.0
        assert rel_err(grads[name], numeric) < 1e-4, name


def test_predict_with_forced_logits(toy):
    vocab, (S, Q, _) = toy
    m = _model("lstm", len(vocab))
    m.params["out.W"][:] = 0.0
    m.params["out.b"][:] = 0.0
    m.params["out.b"][5] = 1.0
    assert predict(m, S, Q).tolist() == [5, 5]
    m.params["out.b"][:] = 0.0
    assert predict(m, S, Q).tolist() == [0, 0]


def test_argmax_survives_positive_rescaling(rng):
    m = _model("gru", 12, n=6)
    s, q = _random_ids(rng, 12, 5, 7), _random_ids(rng, 12, 5, 3)
    before = predict(m, s, q)
    m.params["out.W"] *= 3.7
    m.params["out.b"] *= 3.7
    assert np.array_equal(before, predict(m, s, q))


@pytest.mark.parametrize("kind", ["lstm", "rotlstm"])
def test_overfits_two_examples(kind, toy):
    vocab, (S, Q, A) = toy
    m = _model(kind, len(vocab), n=8, emb=8, dropout=0.0, seed=1)
    opt = AdamState(lr=0.01)
    for _ in range(200):
        _, grads, _ = loss_and_grads(m, S, Q, A, train=False)
        adam_update(opt, m.params, grads)
    assert np.array_equal(predict(m, S, Q), A)


@pytest.mark.parametrize("n,E,V", [(4, 3, 10), (10, 6, 20), (50, 50, 22)])
def test_rotation_parameter_delta_per_cell(n, E, V):
    def weights(kind):
        return _model(kind, V, n=n, emb=E).param_count()[0]

    # question cell sees E inputs, story cell sees E + n
    expected = n * (n + E) // 2 + n * (n + E + n) // 2
    assert weights("rotlstm") - weights("lstm") == expected
    assert weights("rotgru") - weights("gru") == expected
    one = ModelConfig("rotlstm", n, V, E, E, question_cell_kind="lstm")
    assert build_model(one, np.random.default_rng(0)).param_count()[0] - weights("lstm") == n * (2 * n + E) // 2


@pytest.mark.parametrize("kind", ["rotlstm", "rotgru"])
def test_zero_angle_logits_equal_baseline(kind, rng):
    rot = _model(kind, 15, n=6, emb=5, seed=4)
    for k in ("q.W_rot", "s.W_rot"):
        rot.params[k][:] = 0.0
    for k in ("q.b_rot", "s.b_rot"):
        rot.params[k][:] = -1e3
    base_cfg = ModelConfig(CellKind.parse(kind).baseline, 6, 15, 5, 5)
    base = QAModel(base_cfg, {k: v for k, v in rot.params.items() if "rot" not in k})
    s, q = _random_ids(rng, 15, 4, 9), _random_ids(rng, 15, 4, 3)
    assert np.max(np.abs(forward(rot, s, q).value - forward(base, s, q).value)) < 1e-10


def test_output_layer_spans_vocabulary():
    m = _model("lstm", 17, n=6, emb=5)
    assert m.params["out.W"].shape == (6, 17) and m.params["out.b"].shape == (17,)
    assert not m.params["story_emb"][0].any() and not m.params["question_emb"][0].any()
    assert m.question_cell.n == m.story_cell.n == 6
    assert m.story_cell.m == 5 + 6
    assert set(expected_shapes(m.config)) == set(m.params)


def test_model_errors(rng):
    with pytest.raises(ConfigError, match="even"):
        ModelConfig("rotlstm", 7, 10)
    with pytest.raises(ConfigError):
        ModelConfig("lstm", 4, 1)
    m = _model("lstm", 10)
    with pytest.raises(DataError):
        forward(m, np.array([[10]]), np.array([[1]]))
    with pytest.raises(DimensionError):
        forward(m, np.array([[1, 2]]), np.array([[1], [2]]))
    bad = dict(m.params)
    bad["out.b"] = np.zeros(3)
    with pytest.raises(DimensionError):
        QAModel(m.config, bad)


def test_masking_ignores_padding(rng):
    m = _model("gru", 12, n=6, mask_padding=True)
    s, q = _random_ids(rng, 12, 1, 5), _random_ids(rng, 12, 1, 3)
    s[:, 0] = 0
    padded = np.concatenate([np.zeros((1, 4), dtype=np.int64), s], axis=1)
    assert np.allclose(forward(m, s, q).value, forward(m, padded, q).value, rtol=0, atol=1e-14)


def test_copy_is_independent():
    m = _model("lstm", 10)
    c = m.copy()
    c.params["out.b"] += 1.0
    assert not np.array_equal(c.params["out.b"], m.params["out.b"])
