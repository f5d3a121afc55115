"""Command line entry point: ``rotrnn <command> [flags]``.

Commands: ``data inspect``, ``train``, ``eval``, ``sweep``, ``gradcheck``,
``angles``.  Settings come from defaults, then an optional flat
``key = value`` file given with ``--config``, then flags (flags win).  Runs
write ``manifest.json`` with the effective settings next to their outputs.

Exit codes: 0 success, 1 runtime failure (divergence, failed gradient
check), 2 usage or configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import trainer
from .babi_data import TASK_DESCRIPTIONS, build_vocab, load_task, max_lengths, task_files
from .checkpoint import load_checkpoint
from .errors import CheckpointError, ConfigError, DataError, DivergenceError, RotRNNError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3

# config-file key -> (RunConfig field or None, parser)
_KEYS = {
    "task": ("task_id", int),
    "cell": ("cell_kind", str),
    "n": ("n", int),
    "epochs": ("epochs", int),
    "seed": ("seed", int),
    "batch": ("batch_size", int),
    "embed_dim": (None, int),
    "data": ("data_dir", str),
    "out": ("out_dir", str),
    "dropout": ("dropout", float),
    "val_fraction": ("val_fraction", float),
    "eval_test_every": ("eval_test_every", int),
    "mask_padding": ("mask_padding", lambda s: s.strip().lower() in ("1", "true", "yes", "on")),
    "question_cell": ("question_cell_kind", str),
    "lr": ("lr", float),
    "seeds": (None, str),
    "sizes": (None, str),
    "jobs": (None, int),
}


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise UsageError(f"{path}:{no}: unknown key {key!r} (known: {', '.join(sorted(_KEYS))})")
        try:
            out[key] = _KEYS[key][1](value)
        except ValueError:
            raise UsageError(f"{path}:{no}: bad value {value!r} for {key}") from None
    return out


def _int_list(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def effective_settings(args) -> dict:
    """Defaults < config file < flags, keyed by config-file key names."""
    settings = {}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if "data" not in settings and os.environ.get("ROTRNN_DATA"):
        settings["data"] = os.environ["ROTRNN_DATA"]
    return settings


def run_config(settings: dict, **override) -> trainer.RunConfig:
    kw = {}
    for key, value in settings.items():
        field_name = _KEYS[key][0]
        if field_name:
            kw[field_name] = value
    if "embed_dim" in settings:
        kw["story_embed_dim"] = kw["question_embed_dim"] = settings["embed_dim"]
    kw.update(override)
    return trainer.RunConfig(**kw)


def _config_dict(cfg):
    return dataclasses.asdict(cfg)


def _corpus(cfg, tasks):
    try:
        return trainer.corpus_hashes(cfg.data_dir, tasks) if cfg.data_dir else {}
    except FileNotFoundError:
        return {}


def cmd_data_inspect(args) -> int:
    settings = effective_settings(args)
    data_dir = settings.get("data")
    if not data_dir:
        print("error: no corpus directory (use --data or ROTRNN_DATA)", file=sys.stderr)
        return EXIT_USAGE
    tasks = args.tasks or list(range(1, 21))
    rows = []
    for t in tasks:
        try:
            task_files(data_dir, t)
        except FileNotFoundError as exc:
            print(f"error: missing task file {exc}", file=sys.stderr)
            return EXIT_USAGE
        train, test = load_task(data_dir, t)
        vocab, _ = build_vocab(train + test)
        s_len, q_len = max_lengths(train + test)
        rows.append((t, TASK_DESCRIPTIONS[t], len(train), len(test), len(vocab) - 1, s_len, q_len))
    print(f"{'task':>4}  {'description':<38} {'train':>6} {'test':>6} {'vocab':>6} {'story':>6} {'quest':>6}")
    for r in rows:
        print(f"{r[0]:>4}  {r[1]:<38} {r[2]:>6} {r[3]:>6} {r[4]:>6} {r[5]:>6} {r[6]:>6}")
    return EXIT_OK


def cmd_train(args) -> int:
    settings = effective_settings(args)
    cfg = run_config(settings)
    out = Path(cfg.out_dir or Path("runs") / cfg.run_id)
    cfg = dataclasses.replace(cfg, out_dir=str(out))
    data = trainer.load_data(cfg)
    trainer.write_manifest(out, _config_dict(cfg), _corpus(cfg, [cfg.task_id]))
    metrics = trainer.train_run(cfg, data, out)
    print(f"{cfg.run_id}: best-val epoch {metrics.best_epoch}, test accuracy {metrics.best_test_acc:.4f}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    settings = effective_settings(args)
    model, header = load_checkpoint(args.checkpoint)
    stored = dict(header.get("extra", {}).get("run", {}))
    stored.pop("out_dir", None)
    if "data" in settings:
        stored["data_dir"] = settings["data"]
    if args.task is not None:
        stored["task_id"] = args.task
    cfg = trainer.RunConfig(**stored)
    data = trainer.load_data(cfg)
    split = {"train": data.train, "val": data.val, "test": data.test}[args.split]
    loss, acc = trainer.evaluate(args.checkpoint, split)
    result = {"checkpoint": str(args.checkpoint), "split": args.split, "loss": loss, "accuracy": acc}
    print(json.dumps(result, sort_keys=True))
    if args.out:
        out = Path(args.out)
        trainer.write_manifest(out, _config_dict(cfg), _corpus(cfg, [cfg.task_id]))
        (out / f"eval_{args.split}.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    settings = effective_settings(args)
    kinds = [k for k in str(settings.pop("cell", "lstm,rotlstm")).split(",") if k]
    sizes = _int_list(settings.pop("sizes", ",".join(str(n) for n in range(6, 51, 2))))
    seeds = _int_list(settings.pop("seeds", "1,2,3"))
    jobs = settings.pop("jobs", 1)
    if any(n % 2 for n in sizes) and any(k.startswith("rot") for k in kinds):
        raise ConfigError("state size must be even for rotation cells")
    cfg = run_config(settings, cell_kind=kinds[0], n=sizes[0], seed=seeds[0])
    out = Path(cfg.out_dir or Path("runs") / f"sweep-task{cfg.task_id}")
    trainer.write_manifest(
        out, {**_config_dict(cfg), "kinds": kinds, "sizes": sizes, "seeds": seeds, "jobs": jobs},
        _corpus(cfg, [cfg.task_id]),
    )
    rows = trainer.sweep_state_size(cfg, sizes, seeds, kinds, jobs=jobs, out_dir=out)
    for r in rows:
        print(f"{r.cell_kind:8s} n={r.n:3d} mean={r.mean:.4f} std={r.std:.4f} ok={r.runs_ok} failed={r.runs_failed}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    settings = effective_settings(args)
    report = trainer.grad_check(
        settings.get("cell", "lstm"), settings.get("n", 8), args.m, args.t,
        batch=settings.get("batch", 2), seed=settings.get("seed", 0), h=args.h, tol=args.tol,
    )
    print(report)
    if settings.get("out"):
        out = Path(settings["out"])
        trainer.write_manifest(out, {"cell": report.cell_kind, "n": report.n, "m": report.m, "t": report.T,
                                     "h": args.h, "tol": args.tol, "seed": settings.get("seed", 0)})
        (out / "gradcheck.json").write_text(json.dumps({"errors": report.errors, "passed": report.passed}, indent=2))
    if not report.passed:
        print(f"FAILED tensors: {', '.join(report.failures)}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_angles(args) -> int:
    settings = effective_settings(args)
    model, header = load_checkpoint(args.checkpoint)
    stored = dict(header.get("extra", {}).get("run", {}))
    stored.pop("out_dir", None)
    if "data" in settings:
        stored["data_dir"] = settings["data"]
    cfg = trainer.RunConfig(**stored)
    data = trainer.load_data(cfg)
    split = {"train": data.train, "val": data.val, "test": data.test}[args.split]
    if split.vocab_digest != header.get("vocab_digest"):
        raise CheckpointError("checkpoint vocabulary does not match the corpus")
    stats = trainer.angle_stats(model, split.story, split.question)
    print(f"angles={stats.count} min={stats.min:.4f} max={stats.max:.4f} mean={stats.mean:.4f} "
          f"saturated={stats.saturated_fraction:.4f}")
    if settings.get("out"):
        out = Path(settings["out"])
        trainer.write_manifest(out, _config_dict(cfg), _corpus(cfg, [cfg.task_id]))
        stats.write_csv(out / "angles_hist.csv")
    return EXIT_OK


def _common(p, *, run=True):
    p.add_argument("--data", help="bAbI corpus directory (default: $ROTRNN_DATA)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="flat key = value settings file")
    if run:
        p.add_argument("--task", type=int)
        p.add_argument("--cell")
        p.add_argument("--n", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--batch", type=int)
        p.add_argument("--embed-dim", dest="embed_dim", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotrnn", description="Rotation-gated RNNs on bAbI.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    data = sub.add_parser("data", help="corpus utilities")
    data_sub = data.add_subparsers(dest="data_command", required=True)
    inspect = data_sub.add_parser("inspect", help="per-task counts, vocabulary sizes and lengths")
    inspect.add_argument("--data")
    inspect.add_argument("--config")
    inspect.add_argument("--tasks", type=_int_list_arg)
    inspect.set_defaults(func=cmd_data_inspect)

    train = sub.add_parser("train", help="train one model")
    _common(train)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("checkpoint")
    ev.add_argument("--split", choices=("train", "val", "test"), default="test")
    _common(ev, run=False)
    ev.add_argument("--task", type=int)
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="state-size sweep")
    _common(sw)
    sw.add_argument("--seeds")
    sw.add_argument("--sizes")
    sw.add_argument("--jobs", type=int)
    sw.set_defaults(func=cmd_sweep)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check of one cell")
    _common(gc)
    gc.add_argument("--m", type=int, default=6)
    gc.add_argument("--t", type=int, default=5)
    gc.add_argument("--h", type=float, default=1e-5)
    gc.add_argument("--tol", type=float, default=1e-5)
    gc.set_defaults(func=cmd_gradcheck)

    an = sub.add_parser("angles", help="rotation-angle statistics of a checkpoint")
    an.add_argument("checkpoint")
    an.add_argument("--split", choices=("train", "val", "test"), default="test")
    _common(an, run=False)
    an.set_defaults(func=cmd_angles)
    return parser


def _int_list_arg(text):
    try:
        return _int_list(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RotRNNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
