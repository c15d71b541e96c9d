"""Exact finite-dimensional laws of finite MVPSs and the verifiers built on them.

Laws are computed by breadth-first enumeration of all histories: level d
holds, for every length-d tuple in lexicographic order, its probability and
the urn state (accumulated reinforcement and total mass) it leads to.
"""

import csv
import io
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import HypothesisViolated, TooLarge
from .kernel import FiniteKernel, check_balanced, decompose_blocks
from .measure import TOL, FiniteSpace, ProbabilityVector
from .report import CheckReport
from .urn import UrnSpec, _require_finite

MAX_TUPLES = 10**7


def _cap(k, n):
    if k**n > MAX_TUPLES:
        raise TooLarge(f"{k}^{n} = {k**n} tuples exceeds the enumeration cap {MAX_TUPLES}")


@dataclass(frozen=True, eq=False)
class JointLaw:
    """Law of (X_1, ..., X_n); ``probs`` has shape (k,) * n."""

    space: FiniteSpace
    depth: int
    probs: np.ndarray

    @property
    def table(self):
        labels = self.space.labels
        return {
            tuple(labels[i] for i in idx): float(self.probs[idx])
            for idx in itertools.product(range(self.space.k), repeat=self.depth)
        }

    def __getitem__(self, tup):
        return float(self.probs[tuple(self.space.indices(tup))])

    def marginal(self):
        """Law of the first depth-1 coordinates."""
        return JointLaw(self.space, self.depth - 1, self.probs.sum(axis=-1))

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(self.depth)] + ["probability"])
        for tup, p in self.table.items():
            writer.writerow(list(tup) + [repr(p)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        return {
            "labels": list(self.space.labels),
            "depth": self.depth,
            "table": [[list(t), p] for t, p in self.table.items()],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        space = FiniteSpace(tuple(d["labels"]))
        probs = np.zeros((space.k,) * d["depth"])
        for tup, p in d["table"]:
            probs[tuple(space.indices(tup))] = p
        return cls(space, d["depth"], probs)


def _levels(spec, depth):
    """Yield (probs, acc, tot) for history lengths 0..depth (inclusive)."""
    R, f = spec.kernel.matrix, spec.kernel.masses
    k = spec.kernel.k
    base = spec.theta * spec.nu.weights
    probs = np.ones(1)
    acc = np.zeros((1, k))
    tot = np.zeros(1)
    for d in range(depth + 1):
        yield probs, acc, tot
        if d == depth:
            return
        pred = (base + acc) / (spec.theta + tot)[:, None]
        probs = (probs[:, None] * pred).ravel()
        acc = (acc[:, None, :] + R[None, :, :]).reshape(-1, k)
        tot = (tot[:, None] + f[None, :]).ravel()


def joint_law(spec, n):
    """Exact law of (X_1..X_n) as the product of successive predictives."""
    _require_finite(spec)
    k = spec.kernel.k
    _cap(k, n)
    if n == 0:
        return JointLaw(spec.kernel.space, 0, np.array(1.0))
    base = spec.theta * spec.nu.weights
    for probs, acc, tot in _levels(spec, n - 1):
        pass
    pred = (base + acc) / (spec.theta + tot)[:, None]
    final = (probs[:, None] * pred).reshape((k,) * n)
    return JointLaw(spec.kernel.space, n, final)


def _permutation_discrepancy(probs, k, d):
    """Max over permutation classes of (max - min) of tuple probabilities."""
    idx = np.indices((k,) * d).reshape(d, -1)
    key = np.ravel_multi_index(np.sort(idx, axis=0), (k,) * d)
    flat = probs.ravel()
    hi = np.full(k**d, -np.inf)
    lo = np.full(k**d, np.inf)
    np.maximum.at(hi, key, flat)
    np.minimum.at(lo, key, flat)
    spread = np.where(np.isfinite(hi), hi - lo, 0.0)
    cls = int(np.argmax(spread))
    members = np.flatnonzero(key == cls)
    a = members[np.argmax(flat[members])]
    b = members[np.argmin(flat[members])]
    return float(spread[cls]), np.unravel_index(a, (k,) * d), np.unravel_index(b, (k,) * d)


def check_exchangeable(spec, n=4, tol=TOL):
    """Permutation invariance of the exact laws of (X_1..X_d) for d = 2..n.

    ``details['two_step']`` also records the worst two-step asymmetry
    |P(h, a, b) - P(h, b, a)| over histories h of length <= n - 2.
    """
    _require_finite(spec)
    if n < 2:
        raise ValueError("exchangeability needs n >= 2")
    k = spec.kernel.k
    _cap(k, n)
    labels = spec.kernel.space.labels
    worst, witness = 0.0, None
    two_step = 0.0
    per_depth = {}
    law = joint_law(spec, n)
    tables = [law.probs]
    for _ in range(n - 2):
        tables.append(tables[-1].sum(axis=-1))
    for probs in reversed(tables):
        d = probs.ndim
        spread, a, b = _permutation_discrepancy(probs, k, d)
        per_depth[d] = spread
        swap = np.abs(probs - np.swapaxes(probs, -1, -2)).max()
        two_step = max(two_step, float(swap))
        if spread > worst:
            worst = spread
            witness = {
                "tuple": [labels[i] for i in a],
                "permuted": [labels[i] for i in b],
                "p_tuple": float(probs[a]),
                "p_permuted": float(probs[b]),
            }
    return CheckReport(
        "exchangeable",
        worst,
        tol,
        witness if worst > tol else None,
        {"depth": n, "per_depth": per_depth, "two_step": two_step},
    )


def check_cid(spec, depth=4, tol=TOL):
    """Martingale check of the predictives.

    For every positive-probability history h with len(h) < depth and every
    state y, sum_x P_h(x) P_{h+x}(y) must equal P_h(y).
    """
    _require_finite(spec)
    k = spec.kernel.k
    _cap(k, depth)
    R, f = spec.kernel.matrix, spec.kernel.masses
    base = spec.theta * spec.nu.weights
    labels = spec.kernel.space.labels
    worst, witness, skipped = 0.0, None, 0
    per_length = {}
    for length, (probs, acc, tot) in enumerate(_levels(spec, depth - 1)):
        pred = (base + acc) / (spec.theta + tot)[:, None]
        avg = np.zeros_like(pred)
        for x in range(k):
            nxt = (base + acc + R[x]) / (spec.theta + tot + f[x])[:, None]
            avg += pred[:, x : x + 1] * nxt
        resid = np.abs(avg - pred)
        live = probs > 0
        skipped += int((~live).sum())
        resid[~live] = 0.0
        h, y = np.unravel_index(np.argmax(resid), resid.shape)
        r = float(resid[h, y])
        per_length[length] = r
        if r > worst:
            worst = r
            hist = np.unravel_index(h, (k,) * length) if length else ()
            witness = {
                "history": [labels[i] for i in hist],
                "state": labels[y],
                "one_step_average": float(avg[h, y]),
                "predictive": float(pred[h, y]),
            }
    return CheckReport(
        "cid",
        worst,
        tol,
        witness if worst > tol else None,
        {"depth": depth, "per_history_length": per_length, "skipped_zero_probability": skipped},
    )


def _mass_levels(f, tol):
    """Distinct values of f, merging values closer than ``tol``."""
    levels = []
    for v in np.sort(f):
        if not levels or v - levels[-1] > tol:
            levels.append(float(v))
    level_of = np.array([int(np.argmin([abs(v - l) for l in levels])) for v in f])
    return levels, level_of


def _mass_distribution(kernel, nu, blocks, tol):
    labels = kernel.space.labels
    w = nu.weights
    levels, level_of = _mass_levels(kernel.masses, tol)
    overall = np.bincount(level_of, weights=w, minlength=len(levels))
    table, worst, witness = [], 0.0, None
    for b in blocks:
        cond = np.bincount(level_of[b], weights=w[b], minlength=len(levels)) / w[b].sum()
        for l, a in enumerate(levels):
            row = {
                "block": [labels[i] for i in b],
                "mass": a,
                "nu_mass": float(overall[l]),
                "nu_mass_given_block": float(cond[l]),
            }
            table.append(row)
            r = abs(cond[l] - overall[l])
            if r > worst:
                worst, witness = r, {"condition": "mass distribution", **row}
    return CheckReport("mass_distribution", worst, tol, witness if worst > tol else None, {"mass_table": table})


def check_cid_structure(kernel, nu, tol=TOL):
    """Finite c.i.d. structure: block rows nu(.|B_j), and the law of f the same within every block.

    Both conditions are evaluated whenever candidate blocks exist (closed
    classes without transient states); ``details['conditions']`` holds one
    report per condition and the top-level witness is the worst of them.
    """
    if kernel.null_mask.any():
        raise HypothesisViolated("reinforcement must be strictly positive (Z empty)")
    if np.any(nu.weights <= 0):
        raise HypothesisViolated("nu must charge every state")
    dec = decompose_blocks(kernel, nu, tol)
    rows = dec.report
    conditions = {"block_rows": rows.to_dict()}
    candidates = rows.details.get("blocks")
    if candidates is None:
        return CheckReport(
            "cid_structure", rows.max_residual, tol,
            {"condition": "block rows", "witness": rows.witness}, {"conditions": conditions},
        )
    blocks = [kernel.space.indices(b) for b in candidates]
    mass = _mass_distribution(kernel, nu, blocks, tol)
    conditions["mass_distribution"] = mass.to_dict()
    worst = max(rows.max_residual, mass.max_residual)
    if rows.max_residual >= mass.max_residual and not rows.passed:
        witness = {"condition": "block rows", "witness": rows.witness}
    else:
        witness = mass.witness
    return CheckReport(
        "cid_structure",
        worst,
        tol,
        witness if worst > tol else None,
        {"blocks": candidates, "mass_table": mass.details["mass_table"], "conditions": conditions},
    )


def ps_joint_law(theta, nu, labels):
    """Blackwell-MacQueen tuple probability prod_i (theta nu(x_i) + #{j < i : x_j = x_i}) / (theta + i - 1)."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    counts = {}
    p = 1.0
    for i, x in enumerate(labels):
        idx = nu.space.index(x)
        c = counts.get(idx, 0)
        p *= (theta * nu.weights[idx] + c) / (theta + i)
        counts[idx] = c + 1
    return float(p)


def push_law(law, partition):
    """Law of the block labels (pi(X_1)..pi(X_n))."""
    k, m, n = law.space.k, partition.m, law.depth
    idx = np.indices((k,) * n).reshape(n, -1)
    bidx = partition.block_of[idx]
    flat = np.ravel_multi_index(bidx, (m,) * n) if n else np.zeros(1, dtype=np.int64)
    out = np.bincount(flat, weights=law.probs.ravel(), minlength=m**n).reshape((m,) * n)
    return JointLaw(FiniteSpace(partition.names), n, out)


def projected_spec(spec, partition):
    """The MVPS on block labels that the projection should follow.

    Without a null part it is the Polya sequence PS(theta / m, nu_pi) for a
    balanced kernel of mass m; with a null part Z (nu(Z) > 0) it is
    MVPS(theta / m, nu_pi, R_pi) where
    (R_pi)_p = nu(Z^c) delta_p + nu(Z) nu_pi(.|pi(Z)) for p outside pi(Z) and 0 on pi(Z).
    """
    kernel, nu = spec.kernel, spec.nu
    space = FiniteSpace(partition.names)
    nu_pi = partition.push_forward(nu)
    null = kernel.null_mask
    live = ~null & (nu.weights > 0)
    m = float(kernel.masses[live].mean()) if live.any() else 1.0
    theta = spec.theta / m
    nu_z = float(nu.weights[null].sum())
    if nu_z <= 0:
        return UrnSpec(theta, ProbabilityVector(space, nu_pi), FiniteKernel.identity(space))
    null_blocks = np.zeros(partition.m, dtype=bool)
    for j, b in enumerate(partition.blocks):
        flags = null[list(b)]
        if flags.any() and not flags.all():
            raise HypothesisViolated(f"block {j} straddles the null set")
        null_blocks[j] = flags.all()
    z_part = np.where(null_blocks, nu_pi, 0.0) / nu_pi[null_blocks].sum()
    rows = np.zeros((partition.m, partition.m))
    for p in np.flatnonzero(~null_blocks):
        rows[p, p] = 1.0 - nu_z
        rows[p] += nu_z * z_part
    return UrnSpec(theta, ProbabilityVector(space, nu_pi), FiniteKernel(space, rows))


def project_atoms_law(spec, partition, n, tol=TOL):
    """Push the exact law through the block map and compare with the projected MVPS.

    Returns (label law, report).  Without a null part every tuple is compared
    against the closed-form Polya-sequence probability.
    """
    _require_finite(spec)
    _cap(spec.kernel.k, n)
    law = push_law(joint_law(spec, n), partition)
    ref_spec = projected_spec(spec, partition)
    names = partition.names
    worst, witness = 0.0, None
    is_ps = not spec.kernel.null_mask.any() or spec.nu.weights[spec.kernel.null_mask].sum() <= 0
    if is_ps:
        ref_of = lambda tup: ps_joint_law(ref_spec.theta, ref_spec.nu, tup)
    else:
        ref_law = joint_law(ref_spec, n)
        ref_of = lambda tup: ref_law[tup]
    rows = []
    for tup, p in law.table.items():
        ref = ref_of(tup)
        rows.append([list(tup), p, ref])
        if abs(p - ref) > worst:
            worst = abs(p - ref)
            witness = {"tuple": list(tup), "projected": p, "reference": ref}
    report = CheckReport(
        "project_atoms",
        worst,
        tol,
        witness if worst > tol else None,
        {
            "reference": "polya_sequence" if is_ps else "null_part_mvps",
            "theta": ref_spec.theta,
            "nu_pi": ref_spec.nu.weights,
            "blocks": dict(zip(names, partition.label_blocks())),
            "table": rows,
        },
    )
    return law, report


def structurally_exchangeable(kernel, nu, tol=TOL):
    """Balanced and block-decomposable: the finite structure of an exchangeable MVPS with nu > 0."""
    return check_balanced(kernel, nu, tol).passed and decompose_blocks(kernel, nu, tol).passed
