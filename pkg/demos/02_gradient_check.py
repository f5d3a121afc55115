# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Checking backpropagation through time
#
# Every cell is differentiated by the small reverse-mode tape in
# `rotrnn.ndcore`.  `grad_check` perturbs each parameter by +-h, runs the
# whole sequence again and compares the central difference with the
# backpropagated gradient.  The error per tensor is
# `|a - n| / max(|a|, |n|)`.

# %%
from rotrnn.trainer import grad_check

for kind in ("lstm", "rotlstm", "gru", "rotgru"):
    report = grad_check(kind, n=8, m=6, T=5, batch=2, seed=0)
    print(report)
    print()

# %% [markdown]
# A coarser step makes the finite difference itself less accurate.  The
# check gets worse, which is what we expect from a second-order scheme.

# %%
for h in (1e-3, 1e-4, 1e-5):
    r = grad_check("rotlstm", 8, 6, 5, h=h)
    print(f"h={h:g}  worst error {max(r.errors.values()):.2e}")

# %% [markdown]
# The same check is available from the command line:
#
#     rotrnn gradcheck --cell rotgru --n 8 --m 6 --t 5
