"""Convergence and martingale diagnostics on simulated trajectories.

The directing measure is not observable, so TV traces compare each
predictive with the predictive at the last checkpoint; the size of that
proxy gap is part of the returned series rather than hidden.
"""

from dataclasses import dataclass, field

import numpy as np

from .calibration import CALIBRATION
from .errors import FiniteOnly
from .exactlaw import check_cid, projected_spec
from .general import _named, _zscore
from .measure import TOL
from .report import CheckReport, write_csv
from .seeding import make_rng
from .urn import Trajectory, general_simulate_batch


@dataclass(frozen=True, eq=False)
class TraceSeries:
    steps: tuple
    series: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        steps = tuple(int(s) for s in self.steps)
        series = {k: np.asarray(v, dtype=np.float64) for k, v in self.series.items()}
        for name, v in series.items():
            if v.shape != (len(steps),):
                raise ValueError(f"series {name!r} has {v.shape[0]} values for {len(steps)} steps")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "series", series)

    def __getitem__(self, name):
        return self.series[name]

    def to_dict(self):
        return {
            "steps": list(self.steps),
            "series": {k: v.tolist() for k, v in self.series.items()},
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["steps"]), d["series"], d.get("meta", {}))

    def csv_rows(self):
        names = sorted(self.series)
        return ["step"] + names, [[s] + [float(self.series[n][i]) for n in names] for i, s in enumerate(self.steps)]

    def to_csv(self, path):
        header, rows = self.csv_rows()
        write_csv(header, rows, path)


def _checkpoints(traj, checkpoints):
    cps = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if cps and (cps[0] < 0 or cps[-1] > traj.n):
        raise ValueError(f"checkpoints must lie in 0..{traj.n}")
    return cps


def _tv_rows(P, Q):
    return np.minimum(0.5 * np.abs(P - Q).sum(axis=-1), 1.0)


def _block_sums(P, partition):
    out = np.zeros(P.shape[:-1] + (partition.m,))
    for j, b in enumerate(partition.blocks):
        out[..., j] = P[..., list(b)].sum(axis=-1)
    return out


def tv_predictive_trace(traj, checkpoints, partition=None):
    """TV(P_n, P_N) at each checkpoint n, with N the last checkpoint.

    With ``partition`` the distance is taken on the block sigma-algebra.
    """
    if traj.kind == "general":
        raise FiniteOnly("TV traces need a finite trajectory")
    cps = _checkpoints(traj, checkpoints)
    if not cps:
        return TraceSeries((), {"tv": []}, {"proxy_checkpoint": None})
    P = traj.predictive_at(cps)
    if partition is not None:
        P = _block_sums(P, partition)
    return TraceSeries(tuple(cps), {"tv": _tv_rows(P, P[-1])}, {"proxy_checkpoint": cps[-1]})


def empirical_vs_predictive(traj, checkpoints):
    """TV(empirical measure of the first n draws, P_n); n = 0 has no empirical measure and is skipped."""
    if traj.kind == "general":
        raise FiniteOnly("empirical comparison needs a finite trajectory")
    cps = [c for c in _checkpoints(traj, checkpoints) if c > 0]
    if not cps:
        return TraceSeries((), {"tv": []})
    P = traj.predictive_at(cps)
    k = P.shape[1]
    draws = np.asarray(traj.draws, dtype=np.int64)
    emp = np.array([np.bincount(draws[:n], minlength=k) / n for n in cps])
    return TraceSeries(tuple(cps), {"tv": _tv_rows(emp, P)})


def project_trajectory(traj, partition):
    """The block-label trajectory pi(X_1), pi(X_2), ... under the projected spec."""
    spec = projected_spec(traj.spec, partition)
    draws = tuple(int(partition.block_of[x]) for x in traj.draws)
    return Trajectory(spec, traj.seed, draws)


def _general_increments(paths, test_sets, z_max):
    R, n = paths.shape
    if n < 3:
        raise ValueError("need trajectories of length >= 3")
    rows, worst, witness = [], 0.0, None
    for name, A in _named(test_sets):
        ind = np.asarray(A(paths), dtype=np.float64)
        for i in range(1, n - 1):
            # P_i(A) proxied by 1_A(X_{i+1}); B = whole space and B = A on X_1
            for bname, weight in (("X", 1.0), (name, ind[:, 0])):
                mean, se, z = _zscore(weight * (ind[:, i + 1] - ind[:, i]))
                rows.append({"A": name, "B": bname, "step": i, "estimate": mean, "se": se, "z": z})
                if z > worst:
                    worst, witness = z, rows[-1]
    return CheckReport(
        "martingale_increment",
        worst,
        z_max,
        witness if worst > z_max else None,
        {"replicates": R, "length": n, "estimates": rows},
    )


def martingale_increment_check(spec, depth=4, trajectories=None, test_sets=None, tol=None, n=None,
                               replicates=None, seed=0):
    """Martingale property of the predictives.

    Finite specs: the exact one-step average (same as ``check_cid``).
    General specs: mean increments of the predictive at test sets A, with
    P_i(A) proxied by the next-draw indicator, each within ``tol`` (default
    4) standard errors of zero.  ``trajectories`` is a (replicates, length)
    array of points; otherwise ``replicates`` paths of length ``n`` are simulated.
    """
    if spec.is_finite:
        rep = check_cid(spec, depth, TOL if tol is None else tol)
        return CheckReport("martingale_increment", rep.max_residual, rep.tol, rep.witness, rep.details)
    if not test_sets:
        raise ValueError("general specs need test sets")
    if trajectories is None:
        n = 6 if n is None else n
        replicates = CALIBRATION.mean_replicates if replicates is None else replicates
        trajectories = general_simulate_batch(spec, n, replicates, make_rng(seed))
    z_max = CALIBRATION.z_max if tol is None else tol
    return _general_increments(np.asarray(trajectories, dtype=np.float64), test_sets, z_max)


def mean_check(samples, target, z_max=None, labels=None, name="mean"):
    """Column means of ``samples`` (replicates, k) against ``target``, per state in standard errors."""
    z_max = CALIBRATION.z_mean if z_max is None else z_max
    samples = np.asarray(samples, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    diff = np.abs(mean - target)
    z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > TOL, np.inf, 0.0))
    labels = labels or [str(i) for i in range(len(target))]
    rows = [[labels[i], float(mean[i]), float(target[i]), float(se[i]), float(z[i])] for i in range(len(target))]
    i = int(np.argmax(z))
    worst = float(z[i])
    witness = {"state": labels[i], "estimate": float(mean[i]), "target": float(target[i])} if worst > z_max else None
    return CheckReport(name, worst, z_max, witness, {"replicates": samples.shape[0], "table": rows})


def two_point_check(X, law, z_max=None, labels=None, name="two_point_law"):
    """Empirical law of (X_1, X_2) from a (replicates, >=2) index array against an exact (k, k) table.

    Each cell is standardized by its binomial standard error under the exact law.
    """
    z_max = CALIBRATION.z_max if z_max is None else z_max
    law = np.asarray(law, dtype=np.float64)
    k = law.shape[0]
    R = X.shape[0]
    emp = np.bincount(X[:, 0] * k + X[:, 1], minlength=k * k).reshape(k, k) / R
    se = np.sqrt(law * (1.0 - law) / R)
    diff = np.abs(emp - law)
    z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > TOL, np.inf, 0.0))
    labels = labels or [str(i) for i in range(k)]
    rows = [[labels[a], labels[b], float(emp[a, b]), float(law[a, b]), float(se[a, b]), float(z[a, b])]
            for a in range(k) for b in range(k)]
    a, b = np.unravel_index(int(np.argmax(z)), z.shape)
    worst = float(z[a, b])
    witness = None
    if worst > z_max:
        witness = {"cell": [labels[a], labels[b]], "empirical": float(emp[a, b]), "exact": float(law[a, b])}
    return CheckReport(name, worst, z_max, witness, {"replicates": R, "table": rows})
