"""Input-conditioned pairwise rotation of a state vector.

The state ``d`` (``batch x n``, ``n`` even) is rotated in the planes
``(d[2i], d[2i+1])`` by angle ``u[i]``::

    c[2i]   = cos(u_i) d[2i] - sin(u_i) d[2i+1]
    c[2i+1] = sin(u_i) d[2i] + cos(u_i) d[2i+1]

which is multiplication by a block-diagonal orthogonal matrix, done here in
O(n) without forming the matrix.  Angles come from ``2*pi*sigmoid(x W + b)``.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from . import ndcore as nd
from .errors import DimensionError

TWO_PI = 2.0 * math.pi

# multiplication count of the pairwise kernel; see count_kernel_ops()
_ops = {"mul": 0}


@contextlib.contextmanager
def count_kernel_ops():
    """Count scalar multiplications performed by :func:`rotate_pairs` inside the block."""
    start = _ops["mul"]
    box = {"mul": 0}
    try:
        yield box
    finally:
        box["mul"] = _ops["mul"] - start


def _check(u, d):
    if d.ndim != 2 or u.ndim != 2:
        raise DimensionError(f"rotation expects matrices, got u{u.shape} d{d.shape}")
    if d.shape[1] % 2:
        raise DimensionError(f"rotation needs an even state size, got {d.shape[1]}")
    if u.shape != (d.shape[0], d.shape[1] // 2):
        raise DimensionError(
            f"angle shape {u.shape} does not pair with state shape {d.shape}"
        )


def rotate_pairs(u: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Apply the pairwise rotation to raw arrays."""
    _check(u, d)
    cos, sin = np.cos(u), np.sin(u)
    even, odd = d[:, 0::2], d[:, 1::2]
    out = np.empty_like(d, dtype=np.float64)
    out[:, 0::2] = cos * even - sin * odd
    out[:, 1::2] = sin * even + cos * odd
    _ops["mul"] += 4 * u.size
    return out


def rotation_vjp(u: np.ndarray, d: np.ndarray, upstream: np.ndarray):
    """Gradients of ``sum(upstream * rotate_pairs(u, d))`` w.r.t. ``u`` and ``d``.

    ``grad_d`` is the transpose rotation (angle ``-u``) of ``upstream``;
    ``grad_u[i]`` pairs ``upstream`` with the state rotated by ``u_i + pi/2``.
    """
    _check(u, d)
    if upstream.shape != d.shape:
        raise DimensionError(f"upstream shape {upstream.shape} != state shape {d.shape}")
    grad_d = rotate_pairs(-u, upstream)
    quarter = rotate_pairs(u + math.pi / 2, d)
    grad_u = upstream[:, 0::2] * quarter[:, 0::2] + upstream[:, 1::2] * quarter[:, 1::2]
    return grad_u, grad_d


def apply_rotation(u: nd.Var, d: nd.Var) -> nd.Var:
    """Rotate ``d`` by angles ``u`` as a single tape node."""
    tape, (u, d) = nd._vars(u, d)
    uv, dv = u.value, d.value
    out = rotate_pairs(uv, dv)

    def vjp(g):
        return rotation_vjp(uv, dv, g)

    return tape.record("rotation", out, (u, d), vjp)


def compute_angles(x: nd.Var, W_rot: nd.Var, b_rot: nd.Var) -> nd.Var:
    """Angles ``2*pi*sigmoid(x @ W_rot + b_rot)``, each strictly inside (0, 2*pi)."""
    return nd.scale(nd.sigmoid(nd.add(nd.matmul(x, W_rot), b_rot)), TWO_PI)


def dense_U(u) -> np.ndarray:
    """Explicit ``n x n`` block-diagonal rotation matrix for one angle vector.

    Only meant as a reference for checking the O(n) kernel.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise DimensionError(f"dense_U takes a single angle vector, got shape {u.shape}")
    n = 2 * u.size
    U = np.zeros((n, n))
    for i, a in enumerate(u):
        c, s = math.cos(a), math.sin(a)
        U[2 * i, 2 * i] = c
        U[2 * i, 2 * i + 1] = -s
        U[2 * i + 1, 2 * i] = s
        U[2 * i + 1, 2 * i + 1] = c
    return U
