"""SVG line charts for training curves and state-size sweeps."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed salt + no date keeps the SVG bytes reproducible
_RC = {"svg.hashsalt": "rotrnn", "svg.fonttype": "path"}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def accuracy_curves(records, path, title=""):
    """Train/val accuracy per epoch, test accuracy at the epochs where it was measured."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        epochs = [r.epoch for r in records]
        ax.plot(epochs, [r.train_acc for r in records], label="train")
        ax.plot(epochs, [r.val_acc for r in records], label="val")
        tested = [r for r in records if r.test_acc is not None]
        ax.plot([r.epoch for r in tested], [r.test_acc for r in tested], "o-", label="test")
        ax.set_xlabel("epoch")
        ax.set_ylabel("accuracy")
        ax.set_ylim(0, 1)
        ax.set_title(title)
        ax.legend(loc="lower right")
        return _save(fig, path)


def accuracy_vs_state_size(rows, path, title=""):
    """Mean test accuracy (with one-std band) against cell state size, one line per cell kind."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for kind in sorted({r.cell_kind for r in rows}):
            pts = sorted((r.n, r.mean, r.std) for r in rows if r.cell_kind == kind and not math.isnan(r.mean))
            if not pts:
                continue
            ns = [p[0] for p in pts]
            means = [p[1] for p in pts]
            stds = [0.0 if math.isnan(p[2]) else p[2] for p in pts]
            ax.plot(ns, means, "o-", label=kind)
            ax.fill_between(ns, [m - s for m, s in zip(means, stds)], [m + s for m, s in zip(means, stds)], alpha=0.2)
        ax.set_xlabel("cell state size")
        ax.set_ylabel("test accuracy")
        ax.set_ylim(0, 1)
        ax.set_title(title)
        ax.legend(loc="lower right")
        return _save(fig, path)
