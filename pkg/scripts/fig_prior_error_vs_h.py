#!/usr/bin/env python3
"""Prior-estimation error as heterophily grows, baseline vs masked loop.

Drives the sweep command over a heterophily grid and reshapes the aggregate
into one row per (h, method) with mean and std prior error, ready to plot.
Default protocol: planted fraction 1/3 with half observed, so the unlabeled
prior is 0.2; five seeds per point.
"""

import argparse
import csv
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
from gpl.cli import main as gpl_main  # noqa: E402


def run(args):
    sweep_out = os.path.join(args.out, "sweep_h")
    rc = gpl_main([
        "sweep", "--var", "h", "--values", args.values,
        "--seeds", args.seeds, "--method", "both",
        "--n", str(args.n), "--pi-p", str(1 / 3), "--rp", "0.5",
        "--out", sweep_out,
    ])
    if rc != 0:
        return rc

    fig_csv = os.path.join(args.out, "prior_error_vs_h.csv")
    with open(os.path.join(sweep_out, "aggregate.csv")) as f:
        rows = list(csv.DictReader(f))
    with open(fig_csv, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["h", "method", "prior_error_mean", "prior_error_std"])
        for r in rows:
            w.writerow([r["value"], r["method"],
                        r["prior_error_mean"], r["prior_error_std"]])
    print(f"wrote {fig_csv}")
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fig_prior_error_vs_h")
    ap.add_argument("--values", default="0.1,0.3,0.5,0.7,0.9")
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--n", type=int, default=1000)
    sys.exit(run(ap.parse_args()))
