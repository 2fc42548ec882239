#!/usr/bin/env python3
"""Sensitivity to the propagation depth K used by the mask objective.

Sweeps k_prop with everything else held at defaults. Shallow propagation
sees only immediate neighbors; past a few hops the fixed point stops
moving, so both f1 and prior error should flatten.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
from gpl.cli import main as gpl_main  # noqa: E402


def run(args):
    out = os.path.join(args.out, "sweep_k")
    rc = gpl_main([
        "sweep", "--var", "k_prop", "--values", args.values,
        "--seeds", args.seeds, "--method", "gpl",
        "--n", str(args.n), "--h", str(args.h),
        "--out", out,
    ])
    if rc == 0:
        print(f"plot from {out}/aggregate.csv")
    return rc


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fig_k_sensitivity")
    ap.add_argument("--values", default="1,2,5,10,20")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--h", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=1000)
    sys.exit(run(ap.parse_args()))
