"""Independent reference computations used by the tests.

Nothing here touches the tape: the cell equations are written out directly in
numpy, rotations use an explicitly built matrix, and derivatives come from
central differences.
"""

import math

import numpy as np


def sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def dense_rotation(u):
    n = 2 * len(u)
    U = np.zeros((n, n))
    for i, a in enumerate(u):
        U[2 * i:2 * i + 2, 2 * i:2 * i + 2] = [[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]]
    return U


def rotate_rows(u, d):
    return np.stack([dense_rotation(u[b]) @ d[b] for b in range(d.shape[0])])


def lstm_step(p, h, c, x_t, rotate=False):
    x = np.concatenate([h, x_t], axis=1)
    f = sig(x @ p["W_f"] + p["b_f"])
    i = sig(x @ p["W_i"] + p["b_i"])
    o = sig(x @ p["W_o"] + p["b_o"])
    d = f * c + i * np.tanh(x @ p["W_c"] + p["b_c"])
    if rotate:
        u = 2 * math.pi * sig(x @ p["W_rot"] + p["b_rot"])
        c_new = rotate_rows(u, d)
    else:
        c_new = d
    return o * np.tanh(c_new), c_new, d


def gru_step(p, h, x_t, rotate=False):
    x = np.concatenate([h, x_t], axis=1)
    z = sig(x @ p["W_z"] + p["b_z"])
    d = h * sig(x @ p["W_r"] + p["b_r"])
    if rotate:
        u = 2 * math.pi * sig(x @ p["W_rot"] + p["b_rot"])
        r = rotate_rows(u, d)
    else:
        r = d
    cand = np.tanh(np.concatenate([r, x_t], axis=1) @ p["W_h"] + p["b_h"])
    return (1 - z) * h + z * cand, r, d


def run(kind, p, x_seq):
    """All outputs ``batch x T x n`` from a zero state."""
    B, T, _ = x_seq.shape
    n = p["b_f"].shape[0] if "b_f" in p else p["b_z"].shape[0]
    h = np.zeros((B, n))
    c = np.zeros((B, n))
    hs = []
    for t in range(T):
        if kind in ("lstm", "rotlstm"):
            h, c, _ = lstm_step(p, h, c, x_seq[:, t], rotate=kind == "rotlstm")
        else:
            h, _, _ = gru_step(p, h, x_seq[:, t], rotate=kind == "rotgru")
        hs.append(h)
    return np.stack(hs, axis=1)


def central_diff(f, x, h=1e-5):
    """Gradient of scalar ``f`` at array ``x`` by central differences (``x`` restored)."""
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    s = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if s == 0 else float(np.linalg.norm(a - b) / s)
