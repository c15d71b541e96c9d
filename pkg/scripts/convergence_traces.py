"""Median TV traces of the predictives for a few bundled specs.

For each spec, simulate replicate paths, record TV(P_n, P_N) and
TV(empirical_n, P_n) at log-spaced checkpoints, and write the medians
and 90% quantiles to CSV:

    python scripts/convergence_traces.py --length 10000 --replicates 200
"""

import argparse
import csv

import numpy as np

from mvps.config import ExperimentConfig, bundled_configs
from mvps.diagnostics import empirical_vs_predictive, tv_predictive_trace
from mvps.urn import Trajectory, simulate_batch


def traces(spec, length, replicates, seed, checkpoints):
    paths = simulate_batch(spec, length, replicates, seed)
    tv, emp = [], []
    for row in paths:
        traj = Trajectory(spec, seed, tuple(row.tolist()))
        tv.append(tv_predictive_trace(traj, checkpoints)["tv"])
        emp.append(empirical_vs_predictive(traj, checkpoints)["tv"])
    return np.array(tv), np.array(emp)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=int, default=10_000)
    ap.add_argument("--replicates", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--configs", nargs="+", default=["ps", "block3", "cid_example", "null3"])
    ap.add_argument("--out", default="convergence_traces.csv")
    args = ap.parse_args()

    paths = {p.stem: p for p in bundled_configs()}
    cps = sorted({int(c) for c in np.unique(np.logspace(0, np.log10(args.length), 25).astype(int))} | {args.length})
    out = []
    for name in args.configs:
        spec = ExperimentConfig.load(paths[name]).model.spec()
        tv, emp = traces(spec, args.length, args.replicates, args.seed, cps)
        for j, n in enumerate(cps):
            out.append([name, n, np.median(tv[:, j]), np.quantile(tv[:, j], 0.9),
                        np.median(emp[:, j]), np.quantile(emp[:, j], 0.9)])
        print(f"{name:12s} median TV(P_n, P_N) at n={cps[0]}: {np.median(tv[:, 0]):.3f}, "
              f"n={cps[len(cps) // 2]}: {np.median(tv[:, len(cps) // 2]):.3f}")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config", "n", "tv_median", "tv_q90", "emp_median", "emp_q90"])
        w.writerows(out)


if __name__ == "__main__":
    main()
