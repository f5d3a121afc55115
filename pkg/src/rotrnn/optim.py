"""Categorical cross-entropy on logits and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import ndcore as nd
from .errors import ContractError, DataError, DimensionError


def cross_entropy(logits: nd.Var, targets) -> nd.Var:
    """Mean over the batch of ``-log softmax(logits)[target]``."""
    targets = np.asarray(targets)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be batch x V, got {logits.shape}")
    B, V = logits.shape
    if targets.shape != (B,):
        raise DimensionError(f"targets shape {targets.shape} != ({B},)")
    if targets.size and (targets.min() < 0 or targets.max() >= V):
        bad = targets[(targets < 0) | (targets >= V)][0]
        raise DataError(f"target id {int(bad)} outside {V} classes")
    z = logits.value
    lse = logsumexp(z, axis=1)
    rows = np.arange(B)
    loss = np.mean(lse - z[rows, targets])

    def vjp(g):
        p = np.exp(z - lse[:, None])
        p[rows, targets] -= 1.0
        return (p * (g / B),)

    return logits.tape.record("cross_entropy", np.asarray(loss), (logits,), vjp)


def predict_ids(logits) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest id."""
    z = logits.value if isinstance(logits, nd.Var) else np.asarray(logits)
    return np.argmax(z, axis=1)


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(state: AdamState, params: dict, grads: dict):
    """One bias-corrected Adam step; ``params`` arrays are updated in place."""
    if set(grads) != set(params):
        raise ContractError(f"gradient names {sorted(grads)} != parameter names {sorted(params)}")
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise ContractError(f"{name}: gradient shape {grads[name].shape} != parameter shape {p.shape}")
    state.t += 1
    lr = state.lr / (1.0 + state.decay * (state.t - 1)) if state.decay else state.lr
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
