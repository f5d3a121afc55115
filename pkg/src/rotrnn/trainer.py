"""Seeded training runs, evaluation, state-size sweeps and diagnostics.

One run trains a :class:`~rotrnn.model.QAModel` for a fixed number of
epochs with Adam on shuffled minibatches.  Validation accuracy is measured
every epoch and test accuracy at epochs 1, 11, 21, ... and the last one.  The
reported result of a run is the test accuracy at the tested epoch with the
best validation accuracy (earliest epoch on ties).
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charts
from . import ndcore as nd
from .babi_data import Split, TaskData, git_blob_hash, load_task, prepare_task, task_files
from .cells import BoundCell, CellKind, init_params, param_shapes, run_sequence
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, ContractError, DivergenceError, RotRNNError, VocabMismatchError
from .model import ModelConfig, QAModel, build_model, forward, loss_and_grads
from .optim import AdamState, adam_update, cross_entropy, predict_ids
from .rotation import TWO_PI

log = logging.getLogger(__name__)

METRICS_COLUMNS = (
    "run_id", "task", "cell_kind", "n", "seed", "epoch",
    "train_loss", "train_acc", "val_loss", "val_acc", "test_acc",
)


@dataclass
class RunConfig:
    task_id: int = 1
    cell_kind: str = "lstm"
    n: int = 50
    epochs: int = 40
    batch_size: int = 32
    seed: int = 1
    val_fraction: float = 0.05
    eval_test_every: int = 10
    dropout: float = 0.3
    story_embed_dim: int = 50
    question_embed_dim: int = 50
    question_cell_kind: str | None = None
    mask_padding: bool = False
    lr: float = 0.001
    data_dir: str | None = None
    out_dir: str | None = None

    def __post_init__(self):
        self.cell_kind = CellKind.parse(self.cell_kind).value
        if self.question_cell_kind is not None:
            self.question_cell_kind = CellKind.parse(self.question_cell_kind).value
        if not 1 <= int(self.task_id) <= 20:
            raise ConfigError(f"task id must be 1..20, got {self.task_id}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.eval_test_every < 1:
            raise ConfigError("eval_test_every must be >= 1")
        param_shapes(self.cell_kind, self.n, 1)
        if self.question_cell_kind:
            param_shapes(self.question_cell_kind, self.n, 1)

    def model_config(self, vocab_size) -> ModelConfig:
        return ModelConfig(
            cell_kind=self.cell_kind,
            n=self.n,
            vocab_size=vocab_size,
            story_embed_dim=self.story_embed_dim,
            question_embed_dim=self.question_embed_dim,
            dropout=self.dropout,
            question_cell_kind=self.question_cell_kind,
            mask_padding=self.mask_padding,
        )

    @property
    def run_id(self) -> str:
        return f"task{self.task_id}-{self.cell_kind}-n{self.n}-s{self.seed}"

    def digest(self) -> str:
        d = dataclasses.asdict(self)
        d.pop("data_dir")
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def tested(self, epoch: int) -> bool:
        return (epoch - 1) % self.eval_test_every == 0 or epoch == self.epochs


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    test_acc: float | None = None


@dataclass
class RunMetrics:
    run_id: str
    config: dict
    config_hash: str
    seed: int
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_test_acc: float | None = None
    wall_time: float = 0.0
    status: str = "ok"

    def deterministic_view(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("wall_time")
        d["config"].pop("out_dir", None)
        return d

    def rows(self):
        c = self.config
        for r in self.records:
            yield {
                "run_id": self.run_id,
                "task": c["task_id"],
                "cell_kind": c["cell_kind"],
                "n": c["n"],
                "seed": self.seed,
                "epoch": r.epoch,
                "train_loss": repr(r.train_loss),
                "train_acc": repr(r.train_acc),
                "val_loss": repr(r.val_loss),
                "val_acc": repr(r.val_acc),
                "test_acc": "" if r.test_acc is None else repr(r.test_acc),
            }


def select_best(records) -> tuple[int | None, float | None]:
    """Tested epoch with maximum validation accuracy (earliest on ties) and its test accuracy."""
    best = None
    for r in records:
        if r.test_acc is None:
            continue
        if best is None or r.val_acc > best.val_acc:
            best = r
    return (best.epoch, best.test_acc) if best else (None, None)


def write_metrics_csv(metrics_list, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for m in metrics_list:
            w.writerows(m.rows())
    return path


def load_data(config: RunConfig) -> TaskData:
    if config.data_dir is None:
        raise FileNotFoundError("no corpus directory given (set --data or ROTRNN_DATA)")
    train, test = load_task(config.data_dir, config.task_id)
    return prepare_task(train, test, config.val_fraction, config.seed, config.task_id)


def corpus_hashes(data_dir, task_ids) -> dict[str, str]:
    out = {}
    for t in task_ids:
        for p in task_files(data_dir, t):
            out[p.name] = git_blob_hash(p)
    return out


def evaluate_model(model: QAModel, split: Split, batch_size: int = 256) -> tuple[float, float]:
    if len(split) == 0:
        raise ContractError("cannot evaluate on an empty split")
    total, correct = 0.0, 0
    for start in range(0, len(split), batch_size):
        sl = slice(start, start + batch_size)
        tape = nd.Tape()
        logits = forward(model, split.story[sl], split.question[sl], train=False, tape=tape)
        loss = cross_entropy(logits, split.answer[sl])
        k = len(split.answer[sl])
        total += float(loss.value) * k
        correct += int((predict_ids(logits) == split.answer[sl]).sum())
    return total / len(split), correct / len(split)


def evaluate(checkpoint, split: Split, vocab_digest: str | None = None) -> tuple[float, float]:
    """``(loss, accuracy)`` of a model or checkpoint path on ``split``.

    A checkpoint whose vocabulary digest differs from the split's is refused.
    """
    if isinstance(checkpoint, QAModel):
        if vocab_digest is not None and vocab_digest != split.vocab_digest:
            raise VocabMismatchError("model vocabulary does not match the split")
        model = checkpoint
    else:
        model, _ = load_checkpoint(checkpoint, expect_vocab_digest=split.vocab_digest)
    return evaluate_model(model, split)


def train_run(config: RunConfig, data: TaskData | None = None, out_dir=None) -> RunMetrics:
    """Train one model; write metrics, checkpoints and a chart when ``out_dir`` is set."""
    return fit(config, data, out_dir)[0]


def fit(config: RunConfig, data: TaskData | None = None, out_dir=None) -> tuple[RunMetrics, QAModel]:
    """Like :func:`train_run` but also returns the final model."""
    out_dir = out_dir or config.out_dir
    out = Path(out_dir) if out_dir else None
    if data is None:
        data = load_data(config)
    started = time.perf_counter()
    init_seq, shuffle_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(3)
    model = build_model(config.model_config(len(data.vocab)), np.random.default_rng(init_seq))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    opt = AdamState(lr=config.lr)
    metrics = RunMetrics(config.run_id, dataclasses.asdict(config), config.digest(), config.seed)
    digest = data.vocab.digest()
    run_info = {k: v for k, v in dataclasses.asdict(config).items() if k not in ("data_dir", "out_dir")}
    best_val = -1.0
    train = data.train
    N = len(train)
    if N == 0:
        raise ContractError("training split is empty")

    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(N)
        loss_sum, correct = 0.0, 0
        for start in range(0, N, config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss, grads, logits = loss_and_grads(
                model, train.story[idx], train.question[idx], train.answer[idx], train=True, rng=dropout_rng
            )
            if not math.isfinite(loss):
                record = {"run_id": config.run_id, "epoch": epoch, "batch_start": int(start), "loss": repr(loss)}
                metrics.status = "diverged"
                if out is not None:
                    out.mkdir(parents=True, exist_ok=True)
                    (out / "divergence.json").write_text(json.dumps(record, indent=2))
                raise DivergenceError(f"{config.run_id}: non-finite loss at epoch {epoch}", record)
            adam_update(opt, model.params, grads)
            loss_sum += loss * len(idx)
            correct += int((np.argmax(logits, axis=1) == train.answer[idx]).sum())

        val_loss, val_acc = evaluate_model(model, data.val) if len(data.val) else (float("nan"), float("nan"))
        rec = EpochRecord(epoch, loss_sum / N, correct / N, val_loss, val_acc)
        if config.tested(epoch):
            rec.test_acc = evaluate_model(model, data.test)[1]
            if val_acc > best_val:
                best_val = val_acc
                if out is not None:
                    save_checkpoint(model, out / "checkpoint_best.rrnn", digest, {"epoch": epoch, "run": run_info})
        metrics.records.append(rec)
        log.info(
            "%s epoch %d loss %.4f acc %.3f val %.3f%s", config.run_id, epoch, rec.train_loss,
            rec.train_acc, val_acc, "" if rec.test_acc is None else f" test {rec.test_acc:.3f}",
        )

    metrics.best_epoch, metrics.best_test_acc = select_best(metrics.records)
    metrics.wall_time = time.perf_counter() - started
    if out is not None:
        save_checkpoint(model, out / "checkpoint_final.rrnn", digest, {"epoch": config.epochs, "run": run_info})
        write_metrics_csv([metrics], out / "metrics.csv")
        charts.accuracy_curves(metrics.records, out / "accuracy.svg", title=config.run_id)
        (out / "summary.json").write_text(json.dumps(dataclasses.asdict(metrics), indent=2, sort_keys=True))
    return metrics, model


def write_manifest(out_dir, effective: dict, corpus: dict | None = None) -> Path:
    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"config": effective, "corpus": corpus or {}}, indent=2, sort_keys=True) + "\n")
    return path


# --- state-size sweep -------------------------------------------------------


@dataclass
class SweepRow:
    n: int
    cell_kind: str
    mean: float
    std: float
    runs_ok: int
    runs_failed: int


def aggregate(values) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 denominator; NaN for fewer than 2 values)."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        return float("nan"), float("nan")
    std = float(v.std(ddof=1)) if v.size > 1 else float("nan")
    return float(v.mean()), std


def _sweep_job(args):
    config, data, out_dir = args
    try:
        m = train_run(config, data, out_dir)
        return config, m, None
    except (RotRNNError, FloatingPointError, OSError) as exc:
        return config, None, f"{type(exc).__name__}: {exc}"


def sweep_state_size(base: RunConfig, sizes=tuple(range(6, 51, 2)), seeds=(1, 2, 3),
                     kinds=("lstm", "rotlstm"), jobs: int = 1, out_dir=None, data=None) -> list[SweepRow]:
    """Train every (kind, n, seed) combination and aggregate best-val test accuracy.

    Failed runs are recorded and skipped, they never abort the grid.
    """
    kinds = [CellKind.parse(k).value for k in kinds]
    for k in kinds:
        for n in sizes:
            param_shapes(k, n, 1)
    out = Path(out_dir) if out_dir else None
    datasets = {}
    jobs_list = []
    for kind in kinds:
        for n in sizes:
            for seed in seeds:
                cfg = dataclasses.replace(base, cell_kind=kind, n=n, seed=seed)
                if data is not None:
                    d = data
                else:
                    # the train/val split depends on the seed
                    if seed not in datasets:
                        datasets[seed] = load_data(cfg)
                    d = datasets[seed]
                run_out = out / "runs" / cfg.run_id if out else None
                jobs_list.append((cfg, d, run_out))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, jobs_list))
    else:
        results = [_sweep_job(j) for j in jobs_list]

    rows = []
    for kind in kinds:
        for n in sizes:
            accs, failed = [], 0
            for cfg, m, err in results:
                if cfg.cell_kind != kind or cfg.n != n:
                    continue
                if m is None or m.best_test_acc is None:
                    failed += 1
                    log.warning("run %s failed: %s", cfg.run_id, err)
                else:
                    accs.append(m.best_test_acc)
            mean, std = aggregate(accs)
            rows.append(SweepRow(n, kind, mean, std, len(accs), failed))

    if out is not None:
        write_metrics_csv([m for _, m, _ in results if m is not None], out / "sweep_runs.csv")
        with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "cell_kind", "mean_test_acc", "std_test_acc", "runs_ok", "runs_failed"])
            for r in rows:
                w.writerow([r.n, r.cell_kind, repr(r.mean), repr(r.std), r.runs_ok, r.runs_failed])
        charts.accuracy_vs_state_size(rows, out / "sweep.svg", title=f"task {base.task_id}")
    return rows


# --- gradient check -----------------------------------------------------------


@dataclass
class GradCheckReport:
    cell_kind: str
    n: int
    m: int
    T: int
    tol: float
    errors: dict[str, float]

    @property
    def failures(self) -> list[str]:
        return [k for k, e in self.errors.items() if not e < self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    def __str__(self):
        lines = [f"{self.cell_kind} n={self.n} m={self.m} T={self.T} tol={self.tol:g}"]
        for k, e in self.errors.items():
            lines.append(f"  {k:6s} {e:.3e} {'ok' if e < self.tol else 'FAIL'}")
        return "\n".join(lines)


def relative_error(analytic, numeric) -> float:
    """``|a - n|_2 / max(|a|_2, |n|_2)`` for one tensor (0 when both vanish)."""
    a = np.ravel(analytic)
    b = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def sequence_problem(cell_kind, n, m, T, batch, seed):
    """Random cell parameters and a random linear readout loss over all outputs."""
    rng = np.random.default_rng(seed)
    params = init_params(cell_kind, n, m, rng)
    for b in params.biases.values():
        b += rng.normal(0.0, 0.5, size=b.shape)
    x = rng.normal(size=(batch, T, m))
    readout = rng.normal(size=(batch, T, n))

    def loss_of(tensors):
        tape = nd.Tape()
        leaves = tape.params(tensors)
        cell = BoundCell.from_vars(cell_kind, n, m, leaves)
        hs = run_sequence(cell, tape.constant(x), "all")
        return tape, leaves, nd.total(nd.mul(hs, tape.constant(readout)))

    return params, loss_of


def grad_check(cell_kind, n, m, T, batch=2, seed=0, h=1e-5, tol=1e-5) -> GradCheckReport:
    """Compare backpropagated gradients with central differences for every tensor."""
    kind = CellKind.parse(cell_kind)
    params, loss_of = sequence_problem(kind, n, m, T, batch, seed)
    tensors = {k: v.copy() for k, v in params.tensors().items()}
    tape, leaves, loss = loss_of(tensors)
    grads = tape.backward(loss)
    errors = {}
    for name, arr in tensors.items():
        numeric = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            old = arr[i]
            arr[i] = old + h
            up = float(loss_of(tensors)[2].value)
            arr[i] = old - h
            down = float(loss_of(tensors)[2].value)
            arr[i] = old
            numeric[i] = (up - down) / (2 * h)
        errors[name] = relative_error(grads[leaves[name]], numeric)
    return GradCheckReport(kind.value, n, m, T, tol, errors)


# --- angle diagnostics ---------------------------------------------------------


@dataclass
class AngleStats:
    count: int
    min: float
    max: float
    mean: float
    saturated_fraction: float
    hist_counts: np.ndarray
    bin_edges: np.ndarray

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_low", "bin_high", "count"])
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.hist_counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        return path


def angle_stats(checkpoint, story_ids, q_ids, bins: int = 36, margin: float = 0.01,
                batch_size: int = 256) -> AngleStats:
    """Distribution of rotation angles produced on the given examples.

    An angle counts as saturated when it lies within ``margin * 2*pi`` of 0 or
    of ``2*pi`` (no rotation).
    """
    model = checkpoint if isinstance(checkpoint, QAModel) else load_checkpoint(checkpoint)[0]
    cfg = model.config
    if not (CellKind.parse(cfg.cell_kind).rotates or CellKind.parse(cfg.qkind).rotates):
        raise ContractError(f"angle statistics need a rotation cell, model uses {cfg.cell_kind}")
    story_ids = np.asarray(story_ids)
    q_ids = np.asarray(q_ids)
    if len(story_ids) == 0:
        raise ContractError("no examples given")
    captured = []
    for start in range(0, len(story_ids), batch_size):
        sl = slice(start, start + batch_size)
        forward(model, story_ids[sl], q_ids[sl], train=False, capture=captured)
    u = np.concatenate([a.ravel() for a in captured])
    band = margin * TWO_PI
    saturated = np.count_nonzero((u < band) | (u > TWO_PI - band))
    counts, edges = np.histogram(u, bins=bins, range=(0.0, TWO_PI))
    return AngleStats(int(u.size), float(u.min()), float(u.max()), float(u.mean()),
                      saturated / u.size, counts, edges)
