"""Stick-breaking calibration: truncation levels, prior/posterior means and two-point laws.

    python scripts/prior_calibration.py --replicates 1000000
"""

import argparse

from mvps.config import ExperimentConfig, bundled_configs
from mvps.diagnostics import mean_check, two_point_check
from mvps.exactlaw import joint_law
from mvps.prior import (
    sample_dp_batch,
    sample_hierarchical_batch,
    sample_kernel_sb_batch,
    sample_null_mixture_batch,
    sample_posterior_batch,
    truncation_level,
)
from mvps.urn import predictive_after


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=10**6)
    ap.add_argument("--draws", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("theta  epsilon  J  expected residual")
    for theta in (0.5, 1.0, 2.0, 5.0, 10.0):
        for eps in (1e-4, 1e-8):
            J, r = truncation_level(theta, eps)
            print(f"{theta:5.1f}  {eps:7.0e}  {J:4d}  {r:.3e}")

    cfgs = {p.stem: ExperimentConfig.load(p) for p in bundled_configs()}
    block = cfgs["block3"]
    spec, part = block.model.spec(), block.model.partition_obj()
    theta, nu, K = spec.theta, spec.nu, spec.kernel
    data = list(block.task.data)
    checks = [
        mean_check(sample_dp_batch(theta, nu, args.draws, seed=args.seed), nu.weights, name="dp_prior_mean"),
        mean_check(sample_kernel_sb_batch(theta, nu, K, args.draws, seed=args.seed + 1), nu.weights,
                   name="kernel_sb_prior_mean"),
        mean_check(sample_posterior_batch(theta, nu, K, data, args.draws, seed=args.seed + 2),
                   predictive_after(spec, data).weights, name="posterior_mean"),
    ]
    _, X = sample_hierarchical_batch(theta, nu, part, 2, args.replicates, seed=args.seed + 3)
    checks.append(two_point_check(X, joint_law(spec, 2).probs, labels=list(nu.space.labels), name="hierarchical_two_point"))

    null = cfgs["null3"]
    nspec, npart = null.model.spec(), null.model.partition_obj()
    _, _, X = sample_null_mixture_batch(nspec.theta, nspec.nu, npart, null.model.null_set, 2, args.replicates,
                                        seed=args.seed + 4)
    checks.append(two_point_check(X, joint_law(nspec, 2).probs, labels=list(nspec.nu.space.labels),
                                  name="null_mixture_two_point"))

    print()
    for rep in checks:
        print(f"{rep.name:24s} max z = {rep.max_residual:5.2f} (limit {rep.tol:g})  {'PASS' if rep.passed else 'FAIL'}")
    for row in checks[3].details["table"]:
        a, b, emp, exact, se, z = row
        print(f"  P(X1={a}, X2={b}): empirical {emp:.5f}  exact {exact:.5f}  z {z:5.2f}")
    return 0 if all(r.passed for r in checks) else 1


if __name__ == "__main__":
    raise SystemExit(main())
