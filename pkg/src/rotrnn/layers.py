"""Embedding lookup, inverted dropout, dense projection and question broadcast."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndcore as nd
from .errors import ContractError, DataError, DimensionError

PAD_ID = 0


@dataclass
class Embedding:
    vocab_size: int
    dim: int
    table: np.ndarray

    @classmethod
    def init(cls, vocab_size, dim, rng, scale=0.05):
        table = rng.uniform(-scale, scale, size=(vocab_size, dim))
        table[PAD_ID] = 0.0
        return cls(vocab_size, dim, table)


def embed(table: nd.Var, ids) -> nd.Var:
    """Gather rows of ``table`` for integer ``ids`` (``batch x T``).

    Padding positions (id 0) produce zero rows and send no gradient back.
    """
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise DataError(f"embedding ids must be integers, got dtype {ids.dtype}")
    vocab = table.shape[0]
    bad = ids[(ids < 0) | (ids >= vocab)]
    if bad.size:
        raise DataError(f"token id {int(bad.flat[0])} outside vocabulary of size {vocab}")
    live = ids != PAD_ID
    out = table.value[ids] * live[..., None]

    def vjp(g):
        gt = np.zeros_like(table.value)
        np.add.at(gt, ids[live], g[live])
        return (gt,)

    return table.tape.record("embed", out, (table,), vjp)


def dropout(x: nd.Var, rate: float, train: bool, rng: np.random.Generator | None = None) -> nd.Var:
    """Inverted dropout: survivors are scaled by ``1/(1-rate)`` so eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ContractError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return nd.mul(x, x.tape.constant(mask))


def dense(W: nd.Var, b: nd.Var, x: nd.Var) -> nd.Var:
    return nd.add(nd.matmul(x, W), b)


def broadcast_concat(question: nd.Var, story: nd.Var) -> nd.Var:
    """Append the ``batch x q`` question vector to every timestep of ``batch x T x d``."""
    tape, (question, story) = nd._vars(question, story)
    if question.ndim != 2 or story.ndim != 3:
        raise DimensionError(f"expected batch x q and batch x T x d, got {question.shape} and {story.shape}")
    if question.shape[0] != story.shape[0]:
        raise DimensionError(f"batch mismatch: question {question.shape} vs story {story.shape}")
    B, T, d = story.shape
    q = question.shape[1]
    out = np.concatenate([story.value, np.broadcast_to(question.value[:, None, :], (B, T, q))], axis=2)

    def vjp(g):
        return g[:, :, d:].sum(axis=1), g[:, :, :d]

    return tape.record("broadcast_concat", out, (question, story), vjp)
