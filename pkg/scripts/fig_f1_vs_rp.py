#!/usr/bin/env python3
"""F1 against the observed-positive fraction r_p on a heterophilic graph."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
from gpl.cli import main as gpl_main  # noqa: E402


def run(args):
    out = os.path.join(args.out, "sweep_rp")
    rc = gpl_main([
        "sweep", "--var", "rp", "--values", args.values,
        "--seeds", args.seeds, "--method", "both",
        "--n", str(args.n), "--h", str(args.h),
        "--out", out,
    ])
    if rc == 0:
        print(f"plot from {out}/aggregate.csv (f1_mean, f1_std per rp and method)")
    return rc


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fig_f1_vs_rp")
    ap.add_argument("--values", default="0.1,0.25,0.5,0.75,0.9")
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--h", type=float, default=0.7)
    ap.add_argument("--n", type=int, default=1000)
    sys.exit(run(ap.parse_args()))
