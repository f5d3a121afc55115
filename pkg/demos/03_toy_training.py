# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Training on a toy corpus
#
# The real experiments need the bAbI 1k files (point `ROTRNN_DATA` at them).
# To show the pipeline end to end without them, this notebook writes a small
# generated corpus in the same text format: people move between rooms and
# the question asks where someone is.  Numbers obtained here say nothing
# about bAbI.

# %%
import tempfile
from pathlib import Path

from rotrnn import trainer
from rotrnn.babi_data import load_task
from rotrnn.toydata import write_task_dir

work = Path(tempfile.mkdtemp(prefix="rotrnn-demo-"))
corpus = write_task_dir(work / "corpus", task_id=1, n_train=400, n_test=200, seed=0)
print((corpus / "en" / "qa1_toy_train.txt").read_text().splitlines()[:6])

# %%
train, test = load_task(corpus, 1)
print(len(train), "train questions,", len(test), "test questions")
print(train[0])

# %% [markdown]
# Same protocol as the full runs (Adam at 0.001, dropout 0.3, batch 32,
# shuffled every epoch, test accuracy read at the best validation epoch),
# only smaller: state size 16 and 12 epochs.

# %%
results = {}
for kind in ("lstm", "rotlstm"):
    cfg = trainer.RunConfig(task_id=1, cell_kind=kind, n=16, epochs=12, seed=1, eval_test_every=4,
                            story_embed_dim=20, question_embed_dim=20, data_dir=str(corpus))
    metrics, model = trainer.fit(cfg, out_dir=work / kind)
    results[kind] = (metrics, model)
    print(f"{kind:8s} best-val epoch {metrics.best_epoch}, test accuracy {metrics.best_test_acc:.3f}")

# %%
for r in results["rotlstm"][0].records:
    print(r.epoch, round(r.train_loss, 3), round(r.val_acc, 3), r.test_acc)

# %% [markdown]
# Each run leaves `metrics.csv`, `accuracy.svg` and two checkpoints behind.

# %%
print(sorted(p.name for p in (work / "rotlstm").iterdir()))

# %% [markdown]
# Where do the learned angles sit?  Saturation means an angle within 1% of a
# full turn, which would make the gate a no-op.

# %%
data = trainer.load_data(cfg)
stats = trainer.angle_stats(results["rotlstm"][1], data.test.story, data.test.question)
print(f"{stats.count} angles, mean {stats.mean:.2f}, saturated fraction {stats.saturated_fraction:.3f}")
for lo, c in zip(stats.bin_edges[::4], stats.hist_counts[::4]):
    print(f"{lo:5.2f} {'#' * int(60 * c / stats.hist_counts.max())}")
