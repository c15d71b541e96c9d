"""Reinforcement kernels on finite spaces and their structural checks.

A kernel is stored as a non-negative matrix whose row ``x`` is the measure
R_x.  ``f(x) = R_x(X)`` is the row mass and ``Z = {x : f(x) = 0}`` the null
set.  Checks that are quantified "for nu-a.e. x" skip states with
``nu(x) = 0`` and list them in the report details.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    BadNullSet,
    BadPartition,
    EmptyPositivePart,
    NegativeEntries,
    PositiveSupportRequired,
)
from .measure import TOL, FiniteMeasure, FiniteSpace, ProbabilityVector, _frozen
from .report import CheckReport


@dataclass(frozen=True, eq=False)
class FiniteKernel:
    space: FiniteSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        k = self.space.k
        if m.shape != (k, k):
            raise ValueError(f"kernel matrix must be {k}x{k}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("kernel entries must be finite")
        if np.any(m < 0):
            raise NegativeEntries("kernel has negative entries; inspect it with detect_negative")
        object.__setattr__(self, "matrix", m)
        masses = m.sum(axis=1)
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_rows(cls, labels, rows):
        return cls(FiniteSpace(tuple(labels)), np.asarray(rows, dtype=np.float64))

    @classmethod
    def identity(cls, space):
        return cls(space, np.eye(space.k))

    @classmethod
    def constant(cls, nu):
        return cls(nu.space, np.tile(nu.weights, (nu.space.k, 1)))

    @property
    def k(self):
        return self.space.k

    @property
    def null_mask(self):
        return self.masses <= TOL

    @property
    def null_set(self):
        return tuple(np.flatnonzero(self.null_mask))

    def row(self, state):
        return FiniteMeasure(self.space, self.matrix[self.space.index(state)])

    def mass(self, state):
        return float(self.masses[self.space.index(state)])

    def is_canonical(self, tol=TOL):
        pos = ~self.null_mask
        return bool(np.all(np.abs(self.masses[pos] - 1.0) <= tol))

    def __eq__(self, other):
        return (
            isinstance(other, FiniteKernel)
            and self.space == other.space
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self):
        return hash((self.space, self.matrix.tobytes()))

    def __repr__(self):
        return f"FiniteKernel(labels={self.space.labels}, matrix={self.matrix.tolist()})"


@dataclass(frozen=True)
class Partition:
    """Disjoint non-empty blocks of state indices covering the space.

    Blocks are stored in a canonical order (sorted members, blocks ordered by
    their smallest member) so that equal partitions compare equal.
    """

    space: FiniteSpace
    blocks: tuple

    def __post_init__(self):
        blocks = [tuple(sorted(int(i) for i in b)) for b in self.blocks]
        if any(len(b) == 0 for b in blocks):
            raise BadPartition("partition blocks must be non-empty")
        seen = [i for b in blocks for i in b]
        if sorted(seen) != list(range(self.space.k)):
            raise BadPartition(f"blocks {blocks} do not partition 0..{self.space.k - 1}")
        blocks.sort(key=lambda b: b[0])
        object.__setattr__(self, "blocks", tuple(blocks))
        block_of = np.empty(self.space.k, dtype=np.int64)
        for j, b in enumerate(blocks):
            block_of[list(b)] = j
        block_of.setflags(write=False)
        object.__setattr__(self, "block_of", block_of)

    @classmethod
    def from_labels(cls, space, blocks):
        return cls(space, tuple(tuple(space.indices(b)) for b in blocks))

    @classmethod
    def singletons(cls, space):
        return cls(space, tuple((i,) for i in range(space.k)))

    @classmethod
    def whole(cls, space):
        return cls(space, (tuple(range(space.k)),))

    @classmethod
    def from_assignment(cls, space, assignment):
        groups = {}
        for i, a in enumerate(assignment):
            groups.setdefault(a, []).append(i)
        return cls(space, tuple(tuple(g) for g in groups.values()))

    @property
    def m(self):
        return len(self.blocks)

    @property
    def names(self):
        return tuple(f"B{j + 1}" for j in range(self.m))

    def label_blocks(self):
        return [[self.space.labels[i] for i in b] for b in self.blocks]

    def push_forward(self, nu):
        """nu_pi: the law of the block index under nu."""
        return np.bincount(self.block_of, weights=nu.weights, minlength=self.m)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.space == other.space and self.blocks == other.blocks

    def __hash__(self):
        return hash((self.space, self.blocks))


def _check_nu(kernel, nu):
    if nu.space != kernel.space:
        from .errors import SpaceMismatch

        raise SpaceMismatch("kernel and nu live on different spaces")


def _canonical_matrix(matrix):
    masses = matrix.sum(axis=1)
    pos = masses > TOL
    out = np.zeros_like(matrix)
    out[pos] = matrix[pos] / masses[pos, None]
    return out


def detect_negative(raw, tol=TOL):
    """Non-negativity check for a raw (possibly signed) square matrix."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {raw.shape}")
    i, j = np.unravel_index(np.argmin(raw), raw.shape)
    worst = float(raw[i, j])
    witness = None
    if worst < -tol:
        # 1-based positions, matching how kernels are written down by hand
        witness = {"row": int(i) + 1, "col": int(j) + 1, "value": worst}
    return CheckReport(
        "non_negative",
        max_residual=max(0.0, -worst),
        tol=tol,
        witness=witness,
        details={"n_negative": int(np.sum(raw < -tol))},
    )


def check_balanced(kernel, nu, tol=TOL):
    """Is f constant on {x in Z^c : nu(x) > 0}?  ``details['m']`` holds the constant."""
    _check_nu(kernel, nu)
    f = kernel.masses
    support = nu.weights > 0
    active = support & ~kernel.null_mask
    if nu.weights[~kernel.null_mask].sum() <= 0:
        raise EmptyPositivePart("nu puts no mass outside the null set")
    vals = f[active]
    spread = float(vals.max() - vals.min())
    lo, hi = int(np.flatnonzero(active)[np.argmin(vals)]), int(np.flatnonzero(active)[np.argmax(vals)])
    witness = None
    if spread > tol:
        witness = {
            "states": [kernel.space.labels[lo], kernel.space.labels[hi]],
            "masses": [float(f[lo]), float(f[hi])],
        }
    details = {
        "masses": f,
        "null_set": [kernel.space.labels[i] for i in kernel.null_set],
        "ignored_nu_null": [kernel.space.labels[i] for i in np.flatnonzero(~support)],
        "m": float(vals.mean()) if spread <= tol else None,
    }
    return CheckReport("balanced", spread, tol, witness, details)


def canonicalize(kernel):
    """Rescale every row in Z^c to total mass 1; rows in Z stay zero."""
    if kernel.is_canonical():
        # exact fixed point: renormalizing a row of mass 1 - ulp would move bits
        return kernel
    return FiniteKernel(kernel.space, _canonical_matrix(kernel.matrix))


def scale_constant(kernel, nu):
    """c = nu(f), the constant in the scaled forms nu R = c nu and R R = c R."""
    return float(nu.weights @ kernel.masses)


def check_scaled_stationarity(kernel, nu, partition=None, tol=TOL):
    """Check sum_x nu(x) R_x(A) = c nu(A) with c = nu(f).

    By default A ranges over singletons (all events).  With ``partition`` the
    identity is only required on the blocks, i.e. on the sigma-algebra they
    generate.
    """
    _check_nu(kernel, nu)
    c = scale_constant(kernel, nu)
    flow = nu.weights @ kernel.matrix
    target = c * nu.weights
    if partition is not None:
        flow = np.bincount(partition.block_of, weights=flow, minlength=partition.m)
        target = np.bincount(partition.block_of, weights=target, minlength=partition.m)
        names = [" ".join(kernel.space.labels[i] for i in b) for b in partition.blocks]
    else:
        names = list(kernel.space.labels)
    resid = np.abs(flow - target)
    # among (near-)ties prefer an event that loses mass under R
    tied = np.flatnonzero(resid >= resid.max() - tol)
    deficit = tied[flow[tied] < target[tied]]
    worst = int(deficit[0] if len(deficit) else tied[0])
    witness = None
    if resid[worst] > tol:
        witness = {"event": names[worst], "nu_R": float(flow[worst]), "c_nu": float(target[worst])}
    return CheckReport(
        "scaled_stationarity",
        float(resid[worst]),
        tol,
        witness,
        {"c": c, "residuals": resid, "events": names},
    )


def check_self_averaging(kernel, nu, tol=TOL):
    """Check (R R)_x = c R_x for every x with nu(x) > 0, with c = nu(f)."""
    _check_nu(kernel, nu)
    c = scale_constant(kernel, nu)
    R = kernel.matrix
    support = nu.weights > 0
    resid = np.abs(R @ R - c * R)
    resid[~support] = 0.0
    x, y = np.unravel_index(np.argmax(resid), resid.shape)
    worst = float(resid[x, y])
    witness = None
    if worst > tol:
        witness = {
            "x": kernel.space.labels[x],
            "y": kernel.space.labels[y],
            "RR": float((R @ R)[x, y]),
            "cR": float(c * R[x, y]),
        }
    details = {
        "c": c,
        "ignored_nu_null": [kernel.space.labels[i] for i in np.flatnonzero(~support)],
    }
    return CheckReport("self_averaging", worst, tol, witness, details)


def _group_rows(rows, tol):
    reps, assign = [], []
    for r in rows:
        for j, rep in enumerate(reps):
            if np.max(np.abs(r - rep)) <= tol:
                assign.append(j)
                break
        else:
            reps.append(r)
            assign.append(len(reps) - 1)
    return assign


def atoms_of_kernel(kernel, tol=TOL):
    """Atoms of sigma(R): states grouped by identical canonical rows."""
    assign = _group_rows(_canonical_matrix(kernel.matrix), tol)
    return Partition.from_assignment(kernel.space, assign)


def check_proper(kernel, nu, partition, tol=TOL):
    """Does each canonical row put all its mass on the block of its own state?"""
    _check_nu(kernel, nu)
    Rc = _canonical_matrix(kernel.matrix)
    same_block = partition.block_of[:, None] == partition.block_of[None, :]
    own = (Rc * same_block).sum(axis=1)
    active = (nu.weights > 0) & ~kernel.null_mask
    resid = np.where(active, np.abs(1.0 - own), 0.0)
    x = int(np.argmax(resid))
    witness = None
    if resid[x] > tol:
        witness = {"x": kernel.space.labels[x], "mass_on_own_block": float(own[x])}
    return CheckReport(
        "proper",
        float(resid[x]),
        tol,
        witness,
        {"ignored": [kernel.space.labels[i] for i in np.flatnonzero(~active)]},
    )


@dataclass
class BlockDecomposition:
    """Result of decompose_blocks: a partition on success, a witness otherwise.

    ``partition`` covers the whole space; when Z is non-empty it appears as
    one extra block whose index is ``null_block``.
    """

    report: CheckReport
    partition: Partition = None
    null_block: int = None

    @property
    def passed(self):
        return self.report.passed

    def __bool__(self):
        return self.passed

    def label_blocks(self, include_null=True):
        if self.partition is None:
            return None
        blocks = self.partition.label_blocks()
        if not include_null and self.null_block is not None:
            blocks.pop(self.null_block)
        return blocks


def closed_classes(matrix, tol=TOL):
    """Closed communicating classes and transient states of a non-negative matrix."""
    adj = matrix > tol
    n_comp, comp = connected_components(adj, directed=True, connection="strong")
    closed, transient = [], []
    for c in range(n_comp):
        members = np.flatnonzero(comp == c)
        outside = np.ones(len(matrix), dtype=bool)
        outside[members] = False
        if adj[np.ix_(members, outside)].any():
            transient.extend(members.tolist())
        else:
            closed.append(members.tolist())
    closed.sort(key=lambda b: b[0])
    return closed, sorted(transient)


def decompose_blocks(kernel, nu, tol=TOL):
    """Find the block-diagonal structure of an exchangeable reinforcement kernel.

    Candidate blocks are the closed communicating classes of the canonical
    matrix restricted to Z^c.  Every row must equal nu(Z^c) nu(.|block) on
    Z^c and nu itself on Z (the second part is vacuous when Z is empty).
    """
    _check_nu(kernel, nu)
    if np.any(nu.weights <= 0):
        raise PositiveSupportRequired("decompose_blocks needs nu(x) > 0 for every state")
    labels = kernel.space.labels
    Rc = _canonical_matrix(kernel.matrix)
    null = kernel.null_mask
    live = np.flatnonzero(~null)
    nu_w = nu.weights
    nu_z = float(nu_w[null].sum())

    def fail(residual, witness):
        return BlockDecomposition(CheckReport("decompose_blocks", residual, tol, witness, {}))

    if len(live) == 0:
        return fail(np.inf, {"reason": "every state is in the null set"})

    sub = Rc[np.ix_(live, live)]
    closed, transient = closed_classes(sub, tol)
    if transient:
        x = labels[live[transient[0]]]
        return fail(np.inf, {"reason": "transient state", "state": x})

    blocks = [[int(live[i]) for i in c] for c in closed]
    worst, witness = 0.0, None
    for block in blocks:
        target = np.zeros(kernel.k)
        target[block] = (1.0 - nu_z) * nu_w[block] / nu_w[block].sum()
        target[null] = nu_w[null]
        first = Rc[block[0]]
        for x in block:
            spread = float(np.max(np.abs(Rc[x] - first)))
            if spread > max(worst, tol):
                worst = spread
                witness = {
                    "reason": "rows within the class are not identical",
                    "block": [labels[i] for i in block],
                    "states": [labels[block[0]], labels[x]],
                    "rows": [first.tolist(), Rc[x].tolist()],
                }
        for x in block:
            r = float(np.max(np.abs(Rc[x] - target)))
            if r > worst:
                worst = r
                witness = {
                    "reason": "row differs from the block conditional of nu",
                    "block": [labels[i] for i in block],
                    "state": labels[x],
                    "row": Rc[x].tolist(),
                    "expected": target.tolist(),
                }
    report = CheckReport(
        "decompose_blocks",
        worst,
        tol,
        witness if worst > tol else None,
        {"blocks": [[labels[i] for i in b] for b in blocks], "null_set": [labels[i] for i in np.flatnonzero(null)]},
    )
    if not report.passed:
        return BlockDecomposition(report)
    all_blocks = [tuple(b) for b in blocks]
    null_block = None
    if null.any():
        all_blocks.append(tuple(np.flatnonzero(null).tolist()))
    partition = Partition(kernel.space, tuple(all_blocks))
    if null.any():
        null_block = int(partition.block_of[np.flatnonzero(null)[0]])
        report.details["null_block"] = null_block
    return BlockDecomposition(report, partition, null_block)


def exchangeable_kernel_from_partition(nu, partition, null_set=None):
    """Canonical exchangeable reinforcement built from blocks and an optional null set.

    For x outside Z the row is nu(Z^c) nu(.|block(x)) + nu(Z) nu(.|Z); rows in
    Z are zero.  Blocks contained in Z are ignored; blocks straddling Z and
    Z^c are rejected.
    """
    space = nu.space
    if partition.space != space:
        raise BadPartition("partition and nu live on different spaces")
    in_z = np.zeros(space.k, dtype=bool)
    if null_set:
        in_z[space.indices(null_set)] = True
    w = nu.weights
    nu_z = float(w[in_z].sum())
    if in_z.any() and nu_z >= 1.0 - TOL:
        raise BadNullSet("nu(Z) = 1 leaves nothing to reinforce")
    rows = np.zeros((space.k, space.k))
    z_part = np.where(in_z, w, 0.0)
    for block in partition.blocks:
        b = list(block)
        flags = in_z[b]
        if flags.all():
            continue
        if flags.any():
            raise BadPartition(f"block {[space.labels[i] for i in b]} straddles the null set")
        mass = w[b].sum()
        if mass <= 0:
            raise BadPartition(f"block {[space.labels[i] for i in b]} has zero nu-mass")
        row = np.zeros(space.k)
        row[b] = (1.0 - nu_z) * w[b] / mass
        row += z_part
        rows[b] = row
    return FiniteKernel(space, rows)


def block_conditionals(nu, partition):
    """Matrix whose row j is nu(.|B_j)."""
    w = nu.weights
    out = np.zeros((partition.m, nu.space.k))
    for j, b in enumerate(partition.blocks):
        b = list(b)
        mass = w[b].sum()
        if mass <= 0:
            raise BadPartition(f"block {j} has zero nu-mass")
        out[j, b] = w[b] / mass
    return out


def as_probability(nu):
    return nu if isinstance(nu, ProbabilityVector) else ProbabilityVector(nu.space, nu.weights)
