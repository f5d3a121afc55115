"""Question-answering network for bAbI-style data.

    question ids -> embedding -> dropout -> question RNN -> q (batch x n)
    story ids    -> embedding -> dropout -> [word vector, q] at every step
                 -> story RNN -> last output -> dropout -> dense -> logits

Question and story use separate embedding tables.  Both recurrent cells share
one kind and one state size ``n``; the story cell therefore has input width
``story_embed_dim + n``.  The output layer spans the full word vocabulary.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import ndcore as nd
from .cells import BoundCell, CellKind, CellParams, InitConfig, init_params, param_shapes, run_sequence
from .errors import ConfigError, DimensionError
from .layers import Embedding, broadcast_concat, dense, dropout, embed
from .optim import cross_entropy, predict_ids


@dataclass
class ModelConfig:
    cell_kind: str = "lstm"
    n: int = 50
    vocab_size: int = 2
    story_embed_dim: int = 50
    question_embed_dim: int = 50
    dropout: float = 0.3
    question_cell_kind: str | None = None
    mask_padding: bool = False

    def __post_init__(self):
        self.cell_kind = CellKind.parse(self.cell_kind).value
        if self.question_cell_kind is not None:
            self.question_cell_kind = CellKind.parse(self.question_cell_kind).value
        if self.vocab_size < 2:
            raise ConfigError(f"vocabulary needs at least one real token, got size {self.vocab_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        # validates n (positive, even for rotation kinds)
        param_shapes(self.cell_kind, self.n, 1)
        param_shapes(self.qkind, self.n, 1)

    @property
    def qkind(self) -> str:
        return self.question_cell_kind or self.cell_kind

    def to_dict(self):
        return asdict(self)


class QAModel:
    """Parameters live in one flat ``name -> ndarray`` dict.

    Cell tensors are prefixed ``q.`` (question encoder) and ``s.`` (story
    reader); embeddings are ``story_emb`` / ``question_emb``; the output layer
    is ``out.W`` / ``out.b``.
    """

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        expected = expected_shapes(config)
        if set(params) != set(expected):
            raise ConfigError(f"parameter names {sorted(params)} != expected {sorted(expected)}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise DimensionError(f"{name}: expected shape {shape}, got {params[name].shape}")

    @property
    def question_cell(self) -> CellParams:
        return self._cell("q.", self.config.qkind, self.config.question_embed_dim)

    @property
    def story_cell(self) -> CellParams:
        return self._cell("s.", self.config.cell_kind, self.config.story_embed_dim + self.config.n)

    def _cell(self, prefix, kind, m):
        t = {k[len(prefix):]: v for k, v in self.params.items() if k.startswith(prefix)}
        return CellParams(
            kind,
            self.config.n,
            m,
            {k: v for k, v in t.items() if k.startswith("W_")},
            {k: v for k, v in t.items() if k.startswith("b_")},
        )

    def param_count(self) -> tuple[int, int]:
        """``(weights, biases)``; embedding tables count as weights."""
        w = sum(a.size for k, a in self.params.items() if not _is_bias(k))
        b = sum(a.size for k, a in self.params.items() if _is_bias(k))
        return int(w), int(b)

    def copy(self) -> "QAModel":
        return QAModel(ModelConfig(**self.config.to_dict()), {k: v.copy() for k, v in self.params.items()})


def _is_bias(name):
    return name.rsplit(".", 1)[-1].startswith("b")


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    n, V = config.n, config.vocab_size
    shapes = {
        "story_emb": (V, config.story_embed_dim),
        "question_emb": (V, config.question_embed_dim),
    }
    for k, s in param_shapes(config.qkind, n, config.question_embed_dim).items():
        shapes[f"q.{k}"] = s
    for k, s in param_shapes(config.cell_kind, n, config.story_embed_dim + n).items():
        shapes[f"s.{k}"] = s
    shapes["out.W"] = (n, V)
    shapes["out.b"] = (V,)
    return shapes


def build_model(config: ModelConfig, rng: np.random.Generator, init: InitConfig | None = None) -> QAModel:
    params = {
        "story_emb": Embedding.init(config.vocab_size, config.story_embed_dim, rng).table,
        "question_emb": Embedding.init(config.vocab_size, config.question_embed_dim, rng).table,
    }
    q = init_params(config.qkind, config.n, config.question_embed_dim, rng, init)
    s = init_params(config.cell_kind, config.n, config.story_embed_dim + config.n, rng, init)
    params.update({f"q.{k}": v for k, v in q.tensors().items()})
    params.update({f"s.{k}": v for k, v in s.tensors().items()})
    limit = np.sqrt(6.0 / (config.n + config.vocab_size))
    params["out.W"] = rng.uniform(-limit, limit, size=(config.n, config.vocab_size))
    params["out.b"] = np.zeros(config.vocab_size)
    return QAModel(config, params)


def _bound_cell(leaves, prefix, kind, n, m):
    return BoundCell.from_vars(kind, n, m, {k[len(prefix):]: v for k, v in leaves.items() if k.startswith(prefix)})


def forward(model: QAModel, story_ids, q_ids, train: bool = False, rng=None,
            tape: nd.Tape | None = None, leaves: dict | None = None, capture: list | None = None) -> nd.Var:
    """Logits ``batch x vocab``.

    With ``train=True`` dropout is active and ``rng`` is required.  Pass a
    ``tape`` and the ``leaves`` returned by ``tape.params(model.params)`` to
    differentiate afterwards.  ``capture`` collects rotation angles.
    """
    cfg = model.config
    story_ids = np.asarray(story_ids)
    q_ids = np.asarray(q_ids)
    if story_ids.ndim != 2 or q_ids.ndim != 2 or story_ids.shape[0] != q_ids.shape[0]:
        raise DimensionError(f"id arrays must be batch x T with equal batch, got {story_ids.shape} and {q_ids.shape}")
    if tape is None:
        tape = nd.Tape()
    if leaves is None:
        leaves = tape.params(model.params)
    qcell = _bound_cell(leaves, "q.", cfg.qkind, cfg.n, cfg.question_embed_dim)
    scell = _bound_cell(leaves, "s.", cfg.cell_kind, cfg.n, cfg.story_embed_dim + cfg.n)

    story = dropout(embed(leaves["story_emb"], story_ids), cfg.dropout, train, rng)
    question = dropout(embed(leaves["question_emb"], q_ids), cfg.dropout, train, rng)
    q_mask = q_ids != 0 if cfg.mask_padding else None
    s_mask = story_ids != 0 if cfg.mask_padding else None
    q_repr = run_sequence(qcell, question, "last", mask=q_mask, capture=capture)
    merged = broadcast_concat(q_repr, story)
    h = run_sequence(scell, merged, "last", mask=s_mask, capture=capture)
    h = dropout(h, cfg.dropout, train, rng)
    return dense(leaves["out.W"], leaves["out.b"], h)


def loss_and_grads(model: QAModel, story_ids, q_ids, answers, train=True, rng=None):
    """Mean cross-entropy, its gradient per parameter name, and the logits."""
    tape = nd.Tape()
    leaves = tape.params(model.params)
    logits = forward(model, story_ids, q_ids, train=train, rng=rng, tape=tape, leaves=leaves)
    loss = cross_entropy(logits, answers)
    grads = tape.backward(loss)
    return float(loss.value), {k: grads[v] for k, v in leaves.items()}, logits.value


def predict(model: QAModel, story_ids, q_ids) -> np.ndarray:
    """Answer id per example (argmax of eval-mode logits, lowest id on ties)."""
    return predict_ids(forward(model, story_ids, q_ids, train=False))
