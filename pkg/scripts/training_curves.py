"""Train 1-iteration ConvAR and BINetAR per seed; write loss histories and a summary CSV.

Plots the validation curves when matplotlib is importable.
"""

import argparse
import csv
import logging
from dataclasses import replace
from pathlib import Path

from binet.experiments import DESK_TRAIN, corpus_or_build, training_comparison
from binet.training import read_history, write_history


def plot(out: Path) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    for path in sorted(out.glob("*_seed*.csv")):
        h = read_history(path)
        ax.plot([r.epoch for r in h], [r.valid_loss for r in h], label=path.stem, lw=0.8)
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation L1")
    ax.legend(fontsize=6)
    fig.savefig(out / "training_curves.png", dpi=150, bbox_inches="tight")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", default="runs/corpus")
    ap.add_argument("--out", default="runs/training_curves")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--epochs", type=int, default=DESK_TRAIN.max_epochs)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = corpus_or_build(args.corpus)
    cfg = replace(DESK_TRAIN, max_epochs=args.epochs)
    rows = []
    for seed in args.seeds:
        run = training_comparison(ds, seed, cfg)
        for v, res in run.results.items():
            write_history(out / f"{v}_seed{seed}.csv", res.history)
            rows.append((seed, v, res.best_epoch, res.best_valid))
        print(f"seed {seed}: " + ", ".join(f"{v} {s:.5f}" for v, s in run.scores.items()))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "variant", "best_epoch", "best_valid"])
        w.writerows(rows)
    plot(out)
