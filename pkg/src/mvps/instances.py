"""Randomized finite instances for property tests and experiment scripts.

Positives come from block constructions, negatives from small structured
perturbations of them, so every equivalence gets exercised from both sides.
All generators take an explicit ``numpy.random.Generator``.
"""

import numpy as np

from .kernel import FiniteKernel, Partition, exchangeable_kernel_from_partition
from .measure import FiniteSpace, ProbabilityVector

MIN_PERTURBATION = 1e-3


def random_nu(k, rng, floor=0.1):
    """Strictly positive probability vector on k states (weights >= floor / k before scaling)."""
    w = rng.uniform(floor, 1.0, size=k)
    return ProbabilityVector(FiniteSpace.integers(k, start=1), w / w.sum())


def random_partition(space, rng, m=None):
    k = space.k
    m = int(rng.integers(1, k + 1)) if m is None else m
    assign = rng.permutation(np.concatenate([np.arange(m), rng.integers(m, size=k - m)]))
    return Partition.from_assignment(space, assign.tolist())


def exchangeable_instance(k, rng, scale=None):
    """(kernel, nu, partition) with kernel = m * block kernel; m drawn in [0.5, 3] unless given."""
    nu = random_nu(k, rng)
    part = random_partition(nu.space, rng)
    K = exchangeable_kernel_from_partition(nu, part)
    m = rng.uniform(0.5, 3.0) if scale is None else scale
    return FiniteKernel(nu.space, m * K.matrix), nu, part


def perturb_entry(kernel, rng, size=None):
    """Change one entry by at least MIN_PERTURBATION, clamping at zero and keeping every row non-zero."""
    R = kernel.matrix.copy()
    k = kernel.k
    while True:
        i, j = rng.integers(k, size=2)
        d = rng.uniform(MIN_PERTURBATION, 0.3) if size is None else size
        new = R[i, j] - d if rng.random() < 0.5 else R[i, j] + d
        if new < 0:
            new = 0.0 if R[i, j] >= MIN_PERTURBATION else R[i, j] + d
        trial = R.copy()
        trial[i, j] = new
        if trial[i].sum() > MIN_PERTURBATION:
            return FiniteKernel(kernel.space, trial)


def move_mass(kernel, rng):
    """Move mass >= MIN_PERTURBATION between two entries of one row; row masses are unchanged."""
    R = kernel.matrix.copy()
    k = kernel.k
    donors = np.argwhere(R >= MIN_PERTURBATION)
    i, j = donors[rng.integers(len(donors))]
    l = (j + rng.integers(1, k)) % k
    d = rng.uniform(MIN_PERTURBATION, R[i, j])
    R[i, j] -= d
    R[i, l] += d
    return FiniteKernel(kernel.space, R)


def random_stochastic(k, rng, sparsity=0.3):
    """Random canonical kernel; entries zeroed with probability ``sparsity`` (diagonal kept)."""
    R = rng.uniform(0.0, 1.0, size=(k, k))
    R[rng.random((k, k)) < sparsity] = 0.0
    R[np.arange(k), np.arange(k)] += 0.05
    return FiniteKernel(FiniteSpace.integers(k, start=1), R / R.sum(axis=1, keepdims=True))


def idempotent_with_transients(k, rng, pure=None):
    """Idempotent canonical kernel: recurrent classes with one stationary row each, plus transient states.

    Transient rows are mixtures of the class rows; with ``pure`` they copy a
    single class row (so they share its atom).
    """
    space = FiniteSpace.integers(k, start=1)
    n_rec = int(rng.integers(1, k))
    perm = rng.permutation(k)
    rec, trans = perm[:n_rec], perm[n_rec:]
    m = int(rng.integers(1, n_rec + 1))
    cls = rng.permutation(np.concatenate([np.arange(m), rng.integers(m, size=n_rec - m)]))
    pis = np.zeros((m, k))
    for c in range(m):
        members = rec[cls == c]
        pis[c, members] = rng.uniform(0.2, 1.0, size=len(members))
        pis[c] /= pis[c].sum()
    R = np.zeros((k, k))
    R[rec] = pis[cls]
    for t in trans:
        is_pure = rng.random() < 0.5 if pure is None else pure
        if is_pure or m == 1:
            R[t] = pis[rng.integers(m)]
        else:
            a = rng.dirichlet(np.ones(m))
            R[t] = a @ pis
    return FiniteKernel(space, R)


def proper_block_kernel(k, rng):
    """Block kernel whose identical in-block rows are arbitrary laws on the block (not nu(.|B))."""
    space = FiniteSpace.integers(k, start=1)
    part = random_partition(space, rng)
    R = np.zeros((k, k))
    for b in part.blocks:
        b = list(b)
        row = rng.uniform(0.1, 1.0, size=len(b))
        R[np.ix_(b, b)] = row / row.sum()
    return FiniteKernel(space, R), part


def lazy_kernel(nu, a):
    """(1 - a) I + a 1 nu: stationary for nu, idempotent only for a in {0, 1}."""
    k = nu.space.k
    return FiniteKernel(nu.space, (1.0 - a) * np.eye(k) + a * np.tile(nu.weights, (k, 1)))


def cid_structured_instance(rng, m=None, levels=None):
    """Unbalanced kernel with c.i.d. block structure.

    Every block holds one state per mass level a_l, with nu mass w_j q_l,
    so the law of f is q within every block.  Rows are f(x) nu(.|B_j).
    """
    m = int(rng.integers(1, 3)) + 1 if m is None else m
    L = int(rng.integers(2, 3)) if levels is None else levels
    a = np.sort(rng.choice(np.arange(1, 9), size=L, replace=False) * 0.25)
    q = rng.uniform(0.2, 1.0, size=L)
    q /= q.sum()
    w = rng.uniform(0.2, 1.0, size=m)
    w /= w.sum()
    k = m * L
    space = FiniteSpace.integers(k, start=1)
    nu = np.outer(w, q).ravel()
    R = np.zeros((k, k))
    for j in range(m):
        b = slice(j * L, (j + 1) * L)
        cond = nu[b] / nu[b].sum()
        for l in range(L):
            R[j * L + l, b] = a[l] * cond
    return FiniteKernel(space, R), ProbabilityVector(space, nu)


def balanced_canonical_instance(k, rng):
    """One balanced canonical kernel with positive nu from a mix of generators.

    Returns (kernel, nu, kind).
    """
    kind = ("exchangeable", "moved", "lazy", "idempotent", "proper_block", "stochastic")[rng.integers(6)]
    nu = random_nu(k, rng)
    if kind == "exchangeable":
        K, nu, _ = exchangeable_instance(k, rng, scale=1.0)
    elif kind == "moved":
        K, nu, _ = exchangeable_instance(k, rng, scale=1.0)
        K = move_mass(K, rng)
    elif kind == "lazy":
        K = lazy_kernel(nu, rng.uniform(0.05, 0.95))
    elif kind == "idempotent":
        K = idempotent_with_transients(k, rng)
        nu = ProbabilityVector(K.space, nu.weights)
    elif kind == "proper_block":
        K, _ = proper_block_kernel(k, rng)
        nu = ProbabilityVector(K.space, nu.weights)
    else:
        K = random_stochastic(k, rng)
        nu = ProbabilityVector(K.space, nu.weights)
    return K, nu, kind
