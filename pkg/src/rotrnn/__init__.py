"""Recurrent cells with an input-conditioned rotation of the memory state.

Modules:

* ``ndcore``     float64 arrays and a reverse-mode tape
* ``rotation``   angle computation and the O(n) pairwise rotation
* ``cells``      LSTM / RotLSTM / GRU / RotGRU steps and sequence unrolling
* ``layers``     embedding, dropout, dense, question broadcast
* ``optim``      cross-entropy and Adam
* ``babi_data``  bAbI parsing, vocabularies, vectorization, splits
* ``model``      the two-RNN question-answering network
* ``trainer``    seeded runs, sweeps, gradient checks, angle statistics
* ``checkpoint`` binary checkpoint format
* ``cli``        ``rotrnn`` command line
"""

from .cells import CellKind, CellParams, init_params, param_count, run_sequence
from .model import ModelConfig, QAModel, build_model, forward, predict
from .ndcore import Tape, Var
from .rotation import apply_rotation, compute_angles, dense_U, rotation_vjp

__version__ = "0.1.0"

__all__ = [
    "CellKind",
    "CellParams",
    "ModelConfig",
    "QAModel",
    "Tape",
    "Var",
    "apply_rotation",
    "build_model",
    "compute_angles",
    "dense_U",
    "forward",
    "init_params",
    "param_count",
    "predict",
    "rotation_vjp",
    "run_sequence",
]
