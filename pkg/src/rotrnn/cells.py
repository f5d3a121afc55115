"""LSTM, RotLSTM, GRU and RotGRU cells built from tape primitives.

All gates read the concatenation ``x = [h_{t-1}, x_t]`` and every weight
matrix is laid out ``(n + m) x out`` so that the first ``n`` rows act on the
previous output and the remaining ``m`` rows on the input.  The GRU
candidate weight ``W_h`` acts on ``[r_t, x_t]`` instead.

Rotation variants:

* RotLSTM rotates ``d_t = f*c_{t-1} + i*tanh(.)`` into ``c_t``, after the
  forget/add step and before the output nonlinearity.
* RotGRU rotates ``d_t = h_{t-1} * sigmoid(W_r x + b_r)`` into ``r_t``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import ndcore as nd
from .errors import ConfigError, ContractError, DimensionError
from .rotation import apply_rotation, compute_angles


class CellKind(str, enum.Enum):
    LSTM = "lstm"
    ROTLSTM = "rotlstm"
    GRU = "gru"
    ROTGRU = "rotgru"

    @classmethod
    def parse(cls, value) -> "CellKind":
        if isinstance(value, CellKind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(
                f"unknown cell kind {value!r}; expected one of {[k.value for k in cls]}"
            ) from None

    @property
    def rotates(self) -> bool:
        return self in (CellKind.ROTLSTM, CellKind.ROTGRU)

    @property
    def has_cell_state(self) -> bool:
        return self in (CellKind.LSTM, CellKind.ROTLSTM)

    @property
    def baseline(self) -> "CellKind":
        return {CellKind.ROTLSTM: CellKind.LSTM, CellKind.ROTGRU: CellKind.GRU}.get(self, self)


_GATES = {
    CellKind.LSTM: ("f", "i", "o", "c"),
    CellKind.ROTLSTM: ("f", "i", "o", "c"),
    CellKind.GRU: ("z", "r", "h"),
    CellKind.ROTGRU: ("z", "r", "h"),
}


def param_shapes(kind, n: int, m: int) -> dict[str, tuple[int, ...]]:
    """Name -> shape for every tensor of a cell; validates ``n`` and ``m``."""
    kind = CellKind.parse(kind)
    if not (isinstance(n, (int, np.integer)) and n > 0):
        raise ConfigError(f"state size must be a positive integer, got {n!r}")
    if not (isinstance(m, (int, np.integer)) and m > 0):
        raise ConfigError(f"input size must be a positive integer, got {m!r}")
    if kind.rotates and n % 2:
        raise ConfigError(f"state size must be even for {kind.value}, got {n}")
    shapes = {}
    for g in _GATES[kind]:
        shapes[f"W_{g}"] = (n + m, n)
        shapes[f"b_{g}"] = (n,)
    if kind.rotates:
        shapes["W_rot"] = (n + m, n // 2)
        shapes["b_rot"] = (n // 2,)
    return shapes


@dataclass
class InitConfig:
    """Initialization scheme.  Defaults follow the usual Keras recurrent defaults."""

    input_init: str = "glorot_uniform"
    recurrent_init: str = "orthogonal"
    unit_forget_bias: bool = True


@dataclass
class CellParams:
    kind: CellKind
    n: int
    m: int
    weights: dict[str, np.ndarray] = field(default_factory=dict)
    biases: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.kind = CellKind.parse(self.kind)
        self.validate()

    def validate(self):
        shapes = param_shapes(self.kind, self.n, self.m)
        have = {**self.weights, **self.biases}
        if set(have) != set(shapes):
            raise ConfigError(
                f"{self.kind.value} expects tensors {sorted(shapes)}, got {sorted(have)}"
            )
        for name, shape in shapes.items():
            if have[name].shape != shape:
                raise DimensionError(f"{name}: expected shape {shape}, got {have[name].shape}")

    def tensors(self) -> dict[str, np.ndarray]:
        return {**self.weights, **self.biases}

    def bind(self, tape: nd.Tape) -> "BoundCell":
        return BoundCell(self.kind, self.n, self.m, tape.params(self.tensors()))


@dataclass
class BoundCell:
    """Cell tensors registered on a tape."""

    kind: CellKind
    n: int
    m: int
    p: Mapping[str, nd.Var]

    @classmethod
    def from_vars(cls, kind, n, m, p):
        kind = CellKind.parse(kind)
        shapes = param_shapes(kind, n, m)
        missing = set(shapes) - set(p)
        if missing:
            raise ConfigError(f"{kind.value} is missing tensors {sorted(missing)}")
        return cls(kind, n, m, p)


@dataclass
class CellState:
    h: nd.Var
    c: nd.Var | None = None


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    # sign fix makes the distribution uniform (Haar) and the result unique
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def init_params(kind, n: int, m: int, rng: np.random.Generator, init: InitConfig | None = None) -> CellParams:
    kind = CellKind.parse(kind)
    init = init or InitConfig()
    shapes = param_shapes(kind, n, m)
    weights, biases = {}, {}
    for name, shape in shapes.items():
        if name.startswith("b_"):
            biases[name] = np.zeros(shape)
            continue
        if name == "W_rot":
            weights[name] = _init_block(init.input_init, rng, n + m, n // 2)
            continue
        recurrent = _init_block(init.recurrent_init, rng, n, n)
        inputs = _init_block(init.input_init, rng, m, n)
        weights[name] = np.vstack([recurrent, inputs])
    if kind.has_cell_state and init.unit_forget_bias:
        biases["b_f"][:] = 1.0
    return CellParams(kind, n, m, weights, biases)


def _init_block(scheme, rng, rows, cols):
    if scheme == "glorot_uniform":
        return _glorot(rng, rows, cols)
    if scheme == "orthogonal":
        if rows != cols:
            raise ConfigError("orthogonal init needs a square block")
        return _orthogonal(rng, rows)
    if scheme == "zeros":
        return np.zeros((rows, cols))
    raise ConfigError(f"unknown init scheme {scheme!r}")


def param_count(params: CellParams) -> tuple[int, int]:
    """``(weights, biases)`` element counts."""
    w = sum(int(a.size) for a in params.weights.values())
    b = sum(int(a.size) for a in params.biases.values())
    return w, b


def zero_state(cell: BoundCell, batch: int, tape: nd.Tape) -> CellState:
    h = tape.constant(np.zeros((batch, cell.n)))
    c = tape.constant(np.zeros((batch, cell.n))) if cell.kind.has_cell_state else None
    return CellState(h, c)


def _check_step(cell, state, x_t):
    if x_t.ndim != 2 or x_t.shape[1] != cell.m:
        raise DimensionError(f"input step shape {x_t.shape} does not match input size {cell.m}")
    if state.h.shape != (x_t.shape[0], cell.n):
        raise DimensionError(f"state shape {state.h.shape} does not match batch {x_t.shape[0]} x n={cell.n}")


def _gate(p, name, x):
    return nd.add(nd.matmul(x, p[f"W_{name}"]), p[f"b_{name}"])


def _lstm(cell, state, x_t, rotate, capture):
    _check_step(cell, state, x_t)
    p = cell.p
    x = nd.concat([state.h, x_t], axis=1)
    f = nd.sigmoid(_gate(p, "f", x))
    i = nd.sigmoid(_gate(p, "i", x))
    o = nd.sigmoid(_gate(p, "o", x))
    d = nd.add(nd.mul(f, state.c), nd.mul(i, nd.tanh(_gate(p, "c", x))))
    if rotate:
        u = compute_angles(x, p["W_rot"], p["b_rot"])
        if capture is not None:
            capture.append(u.value)
        c = apply_rotation(u, d)
    else:
        c = d
    h = nd.mul(o, nd.tanh(c))
    return CellState(h, c)


def _gru(cell, state, x_t, rotate, capture):
    _check_step(cell, state, x_t)
    p = cell.p
    x = nd.concat([state.h, x_t], axis=1)
    z = nd.sigmoid(_gate(p, "z", x))
    d = nd.mul(state.h, nd.sigmoid(_gate(p, "r", x)))
    if rotate:
        u = compute_angles(x, p["W_rot"], p["b_rot"])
        if capture is not None:
            capture.append(u.value)
        r = apply_rotation(u, d)
    else:
        r = d
    cand = nd.tanh(_gate(p, "h", nd.concat([r, x_t], axis=1)))
    # (1 - z) h + z cand, written as h + z (cand - h)
    h = nd.add(state.h, nd.mul(z, nd.sub(cand, state.h)))
    return CellState(h)


def lstm_step(cell: BoundCell, state: CellState, x_t: nd.Var) -> CellState:
    return _lstm(cell, state, x_t, False, None)


def rotlstm_step(cell: BoundCell, state: CellState, x_t: nd.Var, capture: list | None = None) -> CellState:
    return _lstm(cell, state, x_t, True, capture)


def gru_step(cell: BoundCell, state: CellState, x_t: nd.Var) -> CellState:
    return _gru(cell, state, x_t, False, None)


def rotgru_step(cell: BoundCell, state: CellState, x_t: nd.Var, capture: list | None = None) -> CellState:
    return _gru(cell, state, x_t, True, capture)


def step(cell: BoundCell, state: CellState, x_t: nd.Var, capture: list | None = None) -> CellState:
    """Dispatch on ``cell.kind``.  ``capture`` collects angle arrays for rotation cells."""
    if cell.kind.has_cell_state:
        return _lstm(cell, state, x_t, cell.kind.rotates, capture)
    return _gru(cell, state, x_t, cell.kind.rotates, capture)


def run_sequence(cell: BoundCell, x_seq: nd.Var, return_mode: str = "last", mask=None, capture=None) -> nd.Var:
    """Unroll ``cell`` over ``x_seq`` (``batch x T x m``) from a zero state.

    ``return_mode='last'`` gives the final output ``batch x n``; ``'all'`` gives
    ``batch x T x n``.  ``mask`` (``batch x T``, optional) freezes the state at
    positions where it is zero, so padding does not move the state.
    """
    if return_mode not in ("last", "all"):
        raise ContractError(f"return_mode must be 'last' or 'all', got {return_mode!r}")
    if x_seq.ndim != 3:
        raise DimensionError(f"sequence input must be batch x T x m, got {x_seq.shape}")
    batch, T, m = x_seq.shape
    if T < 1:
        raise ContractError("sequence length must be at least 1")
    if m != cell.m:
        raise DimensionError(f"sequence input width {m} != cell input size {cell.m}")
    tape = x_seq.tape
    state = zero_state(cell, batch, tape)
    outputs = []
    for t in range(T):
        new = step(cell, state, nd.take(x_seq, t, axis=1), capture)
        if mask is not None:
            keep = np.asarray(mask[:, t], dtype=np.float64)
            if not keep.all():
                new = _freeze(new, state, keep, cell.n, tape)
        state = new
        outputs.append(state.h)
    if return_mode == "last":
        return state.h
    return nd.stack(outputs, axis=1)


def _freeze(new, old, keep, n, tape):
    k = tape.constant(np.repeat(keep[:, None], n, axis=1))

    def blend(a, b):
        return nd.add(b, nd.mul(k, nd.sub(a, b)))

    c = blend(new.c, old.c) if new.c is not None else None
    return CellState(blend(new.h, old.h), c)
