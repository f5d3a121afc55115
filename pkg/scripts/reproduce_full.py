"""Overnight grid: every bAbI task, four cell kinds, ten seeds, n=50, 40 epochs.

This is the full-scale counterpart of the desk-scale acceptance runs.  On one
CPU core a single 40-epoch run takes on the order of 45 minutes, so the whole
grid (20 x 4 x 10 = 800 runs) needs many core-days; use ``--jobs`` on a
multi-core machine and ``--tasks`` / ``--kinds`` to split the work.

    python scripts/reproduce_full.py --data /path/to/tasks_1-20_v1-2 --out runs/full --jobs 16

Results land in ``OUT/task{t}/`` (one sweep directory per task) and a combined
``OUT/summary.csv`` with mean and sample standard deviation of the test
accuracy at the best-validation epoch.  ``--dry-run`` lists the runs only.
"""

import argparse
import csv
import os
import sys
from pathlib import Path

from rotrnn import trainer
from rotrnn.babi_data import TASK_DESCRIPTIONS


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--data", default=os.environ.get("ROTRNN_DATA"), help="corpus directory (default $ROTRNN_DATA)")
    p.add_argument("--out", default="runs/full")
    p.add_argument("--tasks", default=",".join(str(t) for t in range(1, 21)))
    p.add_argument("--kinds", default="lstm,rotlstm,gru,rotgru")
    p.add_argument("--seeds", default=",".join(str(s) for s in range(1, 11)))
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--dry-run", action="store_true")
    return p.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    tasks = [int(t) for t in args.tasks.split(",")]
    kinds = args.kinds.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    print(f"{len(tasks) * len(kinds) * len(seeds)} runs: tasks {tasks}, kinds {kinds}, seeds {seeds}")
    if args.dry_run:
        return 0
    if not args.data:
        print("error: no corpus directory (use --data or ROTRNN_DATA)", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task", "description", "cell_kind", "n", "mean_test_acc", "std_test_acc", "runs_ok", "runs_failed"])
        for task in tasks:
            base = trainer.RunConfig(task_id=task, n=args.n, epochs=args.epochs, data_dir=args.data)
            rows = trainer.sweep_state_size(base, sizes=(args.n,), seeds=seeds, kinds=kinds,
                                            jobs=args.jobs, out_dir=out / f"task{task}")
            for r in rows:
                w.writerow([task, TASK_DESCRIPTIONS[task], r.cell_kind, r.n, repr(r.mean), repr(r.std),
                            r.runs_ok, r.runs_failed])
                print(f"task {task:2d} {r.cell_kind:8s} {100 * r.mean:5.1f} +- {100 * r.std:4.1f}")
            fh.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
