# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # The rotation gate
#
# A RotLSTM cell rotates its cell state by an input-dependent block-diagonal
# matrix built from 2x2 rotations.  The matrix is never formed: each pair of
# coordinates is rotated in place, so the cost is linear in the state size.

# %%
import numpy as np

from rotrnn import ndcore as nd
from rotrnn.rotation import TWO_PI, apply_rotation, compute_angles, count_kernel_ops, dense_U, rotate_pairs

rng = np.random.default_rng(0)

# %% [markdown]
# Angles come from a sigmoid scaled to (0, 2pi).  With zero weights every
# angle sits at pi, halfway round.

# %%
tape = nd.Tape()
x = tape.constant(rng.normal(size=(2, 6)))
u = compute_angles(x, tape.leaf(np.zeros((6, 2))), tape.leaf(np.zeros(2)))
print(u.value)

# %% [markdown]
# The pairwise kernel agrees with the explicit matrix and keeps the norm.

# %%
u = rng.uniform(0, TWO_PI, size=(3, 4))
d = rng.normal(size=(3, 8))
fast = rotate_pairs(u, d)
slow = np.stack([dense_U(u[b]) @ d[b] for b in range(3)])
print("max difference to dense U:", np.abs(fast - slow).max())
print("norms before:", np.linalg.norm(d, axis=1))
print("norms after: ", np.linalg.norm(fast, axis=1))

# %%
U = dense_U(u[0])
print(np.round(U[:4, :4], 3))
print("U^T U == I:", np.allclose(U.T @ U, np.eye(8)))

# %% [markdown]
# Rotating back by the negative angles undoes the step, and zero angles
# leave the state alone.

# %%
print(np.abs(rotate_pairs(-u, fast) - d).max())
print(np.array_equal(rotate_pairs(np.zeros_like(u), d), d))

# %% [markdown]
# Multiplication count per call grows linearly with n, whereas a dense
# matrix-vector product would grow with n squared.

# %%
for n in (8, 32, 128, 512):
    with count_kernel_ops() as ops:
        rotate_pairs(np.zeros((1, n // 2)), np.zeros((1, n)))
    print(f"n={n:4d}  pairwise muls={ops['mul']:5d}  dense muls={n * n:7d}")

# %% [markdown]
# On the tape the rotation is a single node whose backward pass rotates the
# upstream gradient by the negative angles.

# %%
tape = nd.Tape()
uv, dv = tape.leaf(u), tape.leaf(d)
out = apply_rotation(uv, dv)
grads = tape.backward(nd.total(out))
print(grads[dv][0])
print(rotate_pairs(-u, np.ones_like(d))[0])
