"""Stick-breaking samplers for the directing random measure.

Truncated Sethuraman weights: W_i ~ Beta(1, theta) by inverse transform
W = 1 - (1 - u)^(1/theta), V_1 = W_1, V_j = W_j prod_{i<j} (1 - W_i), and
residual = prod_{i<=J} (1 - W_i).  By default the residual mass is handed
back to the base measure and the draw is flagged as renormalized.

Every sampler comes in two flavours: a single draw returning a structured
object, and a ``*_batch`` variant returning arrays for Monte Carlo work.
Batches are generated in chunks, chunk ``c`` using the child seed
``derive_seed(seed, c)``.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .calibration import CALIBRATION
from .errors import BadNullSet, BadPartition, HypothesisViolated
from .general import GeneralKernel
from .kernel import FiniteKernel, block_conditionals
from .measure import TOL, FiniteMeasure, FiniteSpace, ProbabilityVector, dp_product_moment
from .report import write_csv
from .seeding import make_rng
from .urn import _inverse_cdf


def truncation_level(theta, epsilon=CALIBRATION.truncation_eps):
    """Smallest J with (theta / (theta + 1))^J <= epsilon, and that expected residual."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if theta <= 0:
        raise ValueError("theta must be positive")
    r = theta / (theta + 1.0)
    J = max(1, math.ceil(math.log(epsilon) / math.log(r)))
    while r**J > epsilon:
        J += 1
    while J > 1 and r ** (J - 1) <= epsilon:
        J -= 1
    return J, r**J


def _sticks(theta, J, size, rng):
    u = rng.random((size, J))
    W = -np.expm1(np.log1p(-u) / theta)
    left = np.cumprod(1.0 - W, axis=1)
    V = W.copy()
    V[:, 1:] *= left[:, :-1]
    return W, V, left[:, -1]


def _chunks(total, seed):
    done, c = 0, 0
    while done < total:
        size = min(CALIBRATION.chunk, total - done)
        yield size, make_rng(seed, c)
        done += size
        c += 1


def _aggregate(V, atoms, k):
    """Row-wise sum of stick weights per atom index: (size, J) -> (size, k)."""
    size = V.shape[0]
    flat = (np.arange(size)[:, None] * k + atoms).ravel()
    return np.bincount(flat, weights=V.ravel(), minlength=size * k).reshape(size, k)


@dataclass(frozen=True, eq=False)
class StickBreakingDraw:
    theta: float
    sticks: np.ndarray
    weights: np.ndarray
    atoms: np.ndarray
    residual: float
    space: object = None

    def to_dict(self):
        atoms = self.atoms.tolist()
        if self.space is not None:
            atoms = [self.space.labels[i] for i in atoms]
        return {
            "theta": self.theta,
            "sticks": self.sticks.tolist(),
            "weights": self.weights.tolist(),
            "atoms": atoms,
            "residual": float(self.residual),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True, eq=False)
class RandomMeasureDraw:
    """One realization of the random measure.

    Finite case: ``measure`` is the realized vector (a ProbabilityVector when
    the residual was reassigned).  General case: ``atoms``/``weights`` are
    particles U_j with weights V_j, each standing for the kernel row R_{U_j}.
    """

    sb: StickBreakingDraw
    residual: float
    renormalized: bool
    measure: object = None
    kernel: object = None
    base_sampler: object = None

    @property
    def atoms(self):
        return self.sb.atoms

    @property
    def weights(self):
        return self.sb.weights

    def sample(self, size, rng):
        """Draw points from a general-space realization."""
        if self.measure is not None:
            idx = _inverse_cdf(np.broadcast_to(self.measure.weights, (size, len(self.measure.weights))), rng.random(size))
            return idx
        w = np.append(self.sb.weights, self.residual if self.renormalized else 0.0)
        j = _inverse_cdf(np.broadcast_to(w, (size, len(w))), rng.random(size))
        out = np.empty(size)
        from_base = j == len(self.sb.weights)
        if from_base.any():
            out[from_base] = self.base_sampler(rng, int(from_base.sum()))
        rest = ~from_base
        out[rest] = self.kernel.sample_conditional(self.sb.atoms[j[rest]], rng)
        return out

    def to_dict(self):
        d = {"stick_breaking": self.sb.to_dict(), "residual": float(self.residual), "renormalized": self.renormalized}
        if self.measure is not None:
            d["measure"] = self.measure.as_dict()
        return d

    def csv_rows(self):
        if self.measure is not None:
            return [[label, w] for label, w in self.measure.as_dict().items()]
        return [[float(a), float(w)] for a, w in zip(self.sb.atoms, self.sb.weights)]

    def to_csv(self, path):
        write_csv(["atom", "weight"], self.csv_rows(), path)


def _iid_indices(weights, u):
    """Same draws as _inverse_cdf for one shared probability vector, via a single CDF."""
    cdf = np.cumsum(weights)
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="left"), len(weights) - 1)


def _base_indices(nu, size, J, rng):
    return _iid_indices(nu.weights, rng.random(size * J)).reshape(size, J)


def _resolve_J(theta, J):
    return truncation_level(theta)[0] if J is None else int(J)


def sample_dp(theta, nu, J=None, seed=0):
    """Truncated DP(theta, nu) draw; ``nu`` is a ProbabilityVector or a base sampler(rng, size)."""
    J = _resolve_J(theta, J)
    if J < 1:
        raise ValueError("J must be >= 1")
    rng = make_rng(seed)
    W, V, res = _sticks(theta, J, 1, rng)
    if isinstance(nu, ProbabilityVector):
        atoms = _base_indices(nu, 1, J, rng)[0]
        space = nu.space
    else:
        atoms = np.asarray(nu(rng, J), dtype=np.float64)
        space = None
    return StickBreakingDraw(float(theta), W[0], V[0], atoms, float(res[0]), space)


def dp_measure(draw, nu, reassign_residual=True):
    """Realized finite measure sum_j V_j delta_{U_j} (+ residual * nu)."""
    w = _aggregate(draw.weights[None, :], draw.atoms[None, :], nu.space.k)[0]
    if reassign_residual:
        return ProbabilityVector(nu.space, w + draw.residual * nu.weights)
    return FiniteMeasure(nu.space, w)


def sample_dp_batch(theta, nu, size, J=None, seed=0, reassign_residual=True):
    """(size, k) array of realized DP(theta, nu) measures on a finite space."""
    J = _resolve_J(theta, J)
    out = []
    for n, rng in _chunks(size, seed):
        _, V, res = _sticks(theta, J, n, rng)
        atoms = _base_indices(nu, n, J, rng)
        P = _aggregate(V, atoms, nu.space.k)
        if reassign_residual:
            P += res[:, None] * nu.weights
        out.append(P)
    return np.concatenate(out)


def _require_sb_kernel(kernel):
    if isinstance(kernel, FiniteKernel):
        if kernel.null_mask.any():
            raise HypothesisViolated("kernel stick-breaking needs strictly positive reinforcement (Z empty)")
        if not kernel.is_canonical():
            raise HypothesisViolated("kernel stick-breaking needs a canonical kernel (mass-1 rows)")


def sample_kernel_sb(theta, nu, kernel, J=None, seed=0, reassign_residual=True):
    """One draw of sum_j V_j R_{U_j} with U_j ~ nu i.i.d. and DP sticks."""
    _require_sb_kernel(kernel)
    J = _resolve_J(theta, J)
    if isinstance(kernel, GeneralKernel):
        base = nu if callable(nu) else kernel.base_sampler
        draw = sample_dp(theta, base, J, seed)
        return RandomMeasureDraw(draw, draw.residual, reassign_residual, kernel=kernel, base_sampler=base)
    draw = sample_dp(theta, nu, J, seed)
    w = draw.weights @ kernel.matrix[draw.atoms]
    if reassign_residual:
        measure = ProbabilityVector(nu.space, w + draw.residual * nu.weights)
    else:
        measure = FiniteMeasure(nu.space, w)
    return RandomMeasureDraw(draw, draw.residual, reassign_residual, measure=measure)


def sample_kernel_sb_batch(theta, nu, kernel, size, J=None, seed=0):
    """(size, k) array of realized kernel stick-breaking measures (residual reassigned to nu)."""
    _require_sb_kernel(kernel)
    J = _resolve_J(theta, J)
    out = []
    for n, rng in _chunks(size, seed):
        _, V, res = _sticks(theta, J, n, rng)
        atoms = _base_indices(nu, n, J, rng)
        Q = _aggregate(V, atoms, nu.space.k)
        out.append(Q @ kernel.matrix + res[:, None] * nu.weights)
    return np.concatenate(out)


def posterior_parameters(theta, nu, kernel, data):
    """(theta + n, (theta nu + sum_i R_{x_i}) / (theta + n)) for canonical kernels."""
    _require_sb_kernel(kernel)
    idx = nu.space.indices(data)
    n = len(idx)
    w = theta * nu.weights + kernel.matrix[idx].sum(axis=0)
    return theta + n, ProbabilityVector(nu.space, w / (theta + n))


def _posterior_base_sampler(theta, kernel, data):
    data = np.asarray(data, dtype=np.float64)
    n = len(data)

    def sampler(rng, size):
        from_data = rng.random(size) * (theta + n) >= theta
        out = kernel.sample_base(rng, size)
        if from_data.any():
            parents = data[rng.integers(n, size=int(from_data.sum()))]
            out[from_data] = kernel.sample_conditional(parents, rng)
        return out

    return sampler


def sample_posterior(theta, nu, kernel, data, J=None, seed=0, reassign_residual=True):
    """Posterior draw: kernel stick-breaking with updated parameters."""
    if isinstance(kernel, GeneralKernel):
        post_theta = theta + len(data)
        base = _posterior_base_sampler(theta, kernel, data) if len(data) else kernel.base_sampler
        return sample_kernel_sb(post_theta, base, kernel, _resolve_J(post_theta, J), seed, reassign_residual)
    post_theta, post_nu = posterior_parameters(theta, nu, kernel, data)
    return sample_kernel_sb(post_theta, post_nu, kernel, _resolve_J(post_theta, J), seed, reassign_residual)


def sample_posterior_batch(theta, nu, kernel, data, size, J=None, seed=0):
    post_theta, post_nu = posterior_parameters(theta, nu, kernel, data)
    return sample_kernel_sb_batch(post_theta, post_nu, kernel, size, _resolve_J(post_theta, J), seed)


@dataclass(frozen=True, eq=False)
class HierarchicalSample:
    """One run of the three-level scheme: Q ~ DP, labels p_i ~ Q, X_i ~ nu(.|block p_i)."""

    q: np.ndarray
    sb: StickBreakingDraw
    labels: np.ndarray
    samples: np.ndarray
    xi: np.ndarray = None

    def to_dict(self, space=None, partition=None):
        d = {
            "q": self.q.tolist(),
            "stick_breaking": self.sb.to_dict(),
            "labels": [partition.names[p] for p in self.labels] if partition else self.labels.tolist(),
            "samples": [space.labels[x] for x in self.samples] if space else self.samples.tolist(),
        }
        if self.xi is not None:
            d["xi"] = self.xi.tolist()
        return d


def _block_masses(nu, partition):
    w = partition.push_forward(nu)
    if np.any(w <= 0):
        raise BadPartition("every block needs positive nu-mass")
    return w


def _first_sb(theta, sticks):
    W, V, res, atoms = sticks
    return StickBreakingDraw(float(theta), W[0], V[0], atoms[0], float(res[0]))


def _hierarchical_chunk(theta, nu_pi, cond, n, size, J, rng):
    m = len(nu_pi)
    W, V, res = _sticks(theta, J, size, rng)
    atoms = _iid_indices(nu_pi, rng.random(size * J)).reshape(size, J)
    Q = _aggregate(V, atoms, m) + res[:, None] * nu_pi
    p = _inverse_cdf(Q[:, None, :], rng.random((size, n)))
    X = _inverse_cdf(cond[p], rng.random((size, n)))
    return Q, (W, V, res, atoms), p, X


def sample_hierarchical(theta, nu, partition, n, J=None, seed=0):
    """Q ~ DP(theta, nu_pi); p_i | Q i.i.d. Q; X_i ~ nu(.|pi = p_i)."""
    nu_pi = _block_masses(nu, partition)
    nu_pi = nu_pi / nu_pi.sum()
    cond = block_conditionals(nu, partition)
    J = _resolve_J(theta, J)
    rng = make_rng(seed)
    Q, sticks, p, X = _hierarchical_chunk(theta, nu_pi, cond, n, 1, J, rng)
    return HierarchicalSample(Q[0], _first_sb(theta, sticks), p[0], X[0])


def sample_hierarchical_batch(theta, nu, partition, n, replicates, J=None, seed=0):
    """Arrays (labels, samples), each of shape (replicates, n)."""
    nu_pi = _block_masses(nu, partition)
    nu_pi = nu_pi / nu_pi.sum()
    cond = block_conditionals(nu, partition)
    J = _resolve_J(theta, J)
    ps, xs = [], []
    for size, rng in _chunks(replicates, seed):
        _, _, p, X = _hierarchical_chunk(theta, nu_pi, cond, n, size, J, rng)
        ps.append(p)
        xs.append(X)
    return np.concatenate(ps), np.concatenate(xs)


def _null_setup(nu, partition, null_set):
    space = nu.space
    in_z = np.zeros(space.k, dtype=bool)
    in_z[space.indices(null_set)] = True
    nu_z = float(nu.weights[in_z].sum())
    if not (TOL < nu_z < 1.0 - TOL):
        raise BadNullSet(f"need 0 < nu(Z) < 1, got {nu_z}")
    live_blocks = []
    for b in partition.blocks:
        flags = in_z[list(b)]
        if flags.all():
            continue
        if flags.any():
            raise BadPartition("a block straddles the null set")
        live_blocks.append(b)
    nu_pi = np.array([nu.weights[list(b)].sum() for b in live_blocks])
    if np.any(nu_pi <= 0):
        raise BadPartition("every block outside Z needs positive nu-mass")
    cond = np.zeros((len(live_blocks) + 1, space.k))
    for j, b in enumerate(live_blocks):
        cond[j, list(b)] = nu.weights[list(b)] / nu_pi[j]
    cond[-1, in_z] = nu.weights[in_z] / nu_z
    return nu_z, nu_pi / nu_pi.sum(), cond, live_blocks


def _null_chunk(theta, nu_z, nu_pi, cond, n, size, J, rng):
    m = len(nu_pi)
    W, V, res = _sticks(theta, J, size, rng)
    atoms = _iid_indices(nu_pi, rng.random(size * J)).reshape(size, J)
    Q = _aggregate(V, atoms, m) + res[:, None] * nu_pi
    p = _inverse_cdf(Q[:, None, :], rng.random((size, n)))
    xi = rng.random((size, n)) < 1.0 - nu_z
    row = np.where(xi, p, m)
    X = _inverse_cdf(cond[row], rng.random((size, n)))
    return Q, (W, V, res, atoms), p, xi, X


def sample_null_mixture(theta, nu, partition, null_set, n, J=None, seed=0):
    """(p_i, xi_i) i.i.d. Q x Ber(nu(Z^c)); X_i ~ nu(.|block p_i) if xi_i else nu(.|Z)."""
    nu_z, nu_pi, cond, _ = _null_setup(nu, partition, null_set)
    J = _resolve_J(theta, J)
    rng = make_rng(seed)
    Q, sticks, p, xi, X = _null_chunk(theta, nu_z, nu_pi, cond, n, 1, J, rng)
    return HierarchicalSample(Q[0], _first_sb(theta, sticks), p[0], X[0], xi[0])


def sample_null_mixture_batch(theta, nu, partition, null_set, n, replicates, J=None, seed=0):
    """Arrays (labels, xi, samples), each of shape (replicates, n)."""
    nu_z, nu_pi, cond, _ = _null_setup(nu, partition, null_set)
    J = _resolve_J(theta, J)
    ps, xis, xs = [], [], []
    for size, rng in _chunks(replicates, seed):
        _, _, p, xi, X = _null_chunk(theta, nu_z, nu_pi, cond, n, size, J, rng)
        ps.append(p)
        xis.append(xi)
        xs.append(X)
    return np.concatenate(ps), np.concatenate(xis), np.concatenate(xs)


def hierarchical_two_point_law(theta, nu, partition):
    """Exact P(X_1 = a, X_2 = b) of the three-level scheme from DP product moments.

    sum_{j,l} nu(a|B_j) nu(b|B_l) E[Q_j Q_l] with Q ~ DP(theta, nu_pi).
    """
    nu_pi = _block_masses(nu, partition)
    q = ProbabilityVector(FiniteSpace(partition.names), nu_pi / nu_pi.sum())
    m = partition.m
    M = np.array([[dp_product_moment(theta, q, j, l) for l in range(m)] for j in range(m)])
    cond = block_conditionals(nu, partition)
    return cond.T @ M @ cond
