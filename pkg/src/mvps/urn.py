"""The MVPS predictive recursion and trajectory simulation.

After observing x_1..x_n the next color is drawn from

    (theta nu + sum_i R_{x_i}) / (theta + sum_i f(x_i)).

Finite kernels get exact predictive vectors; general kernels are simulated
as a weighted particle urn (one particle per past draw).
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import BadQ, FiniteOnly, HypothesisViolated, SamplerFailure
from .general import GeneralKernel
from .kernel import FiniteKernel
from .measure import FiniteMeasure, ProbabilityVector
from .seeding import make_rng


@dataclass(frozen=True)
class UrnSpec:
    theta: float
    nu: ProbabilityVector
    kernel: object

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        object.__setattr__(self, "theta", float(self.theta))
        if isinstance(self.kernel, FiniteKernel):
            if self.nu is None or self.nu.space != self.kernel.space:
                raise ValueError("finite specs need nu on the kernel's space")
            if not isinstance(self.nu, ProbabilityVector):
                object.__setattr__(self, "nu", ProbabilityVector(self.nu.space, self.nu.weights))
        elif not isinstance(self.kernel, GeneralKernel):
            raise TypeError("kernel must be a FiniteKernel or a GeneralKernel")

    @property
    def is_finite(self):
        return isinstance(self.kernel, FiniteKernel)

    @property
    def space(self):
        return self.kernel.space if self.is_finite else None

    def describe(self):
        if self.is_finite:
            return {
                "theta": self.theta,
                "labels": list(self.kernel.space.labels),
                "nu": self.nu.weights.tolist(),
                "kernel": self.kernel.matrix.tolist(),
            }
        return {"theta": self.theta, "kernel": self.kernel.describe()}

    def hash(self):
        text = json.dumps(self.describe(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class UrnState:
    spec: UrnSpec
    n: int
    accumulated: np.ndarray
    total_added: float

    @property
    def contents(self):
        """The urn theta nu + sum_i R_{x_i} as a measure."""
        return FiniteMeasure(self.spec.nu.space, self.spec.theta * self.spec.nu.weights + self.accumulated)


def _require_finite(spec):
    if not spec.is_finite:
        raise FiniteOnly("this operation needs a finite reinforcement kernel")


def initial_state(spec):
    _require_finite(spec)
    acc = np.zeros(spec.kernel.k)
    acc.setflags(write=False)
    return UrnState(spec, 0, acc, 0.0)


def step(state, x):
    """Observe color ``x`` (label or index) and add R_x to the urn."""
    spec = state.spec
    i = spec.kernel.space.index(x)
    if spec.kernel.null_mask[i]:
        return UrnState(spec, state.n + 1, state.accumulated, state.total_added)
    acc = state.accumulated + spec.kernel.matrix[i]
    acc.setflags(write=False)
    return UrnState(spec, state.n + 1, acc, state.total_added + float(spec.kernel.masses[i]))


def predictive(state):
    spec = state.spec
    _require_finite(spec)
    w = (spec.theta * spec.nu.weights + state.accumulated) / (spec.theta + state.total_added)
    return ProbabilityVector(spec.nu.space, w)


def state_after(spec, history):
    state = initial_state(spec)
    for x in history:
        state = step(state, x)
    return state


def predictive_after(spec, history):
    return predictive(state_after(spec, history))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A seeded sample path.

    ``draws`` holds state indices for finite specs and floats for general
    ones.  ``snapshots[i]`` (finite case, optional) is the predictive after
    the first ``i`` draws, so it has ``len(draws) + 1`` rows.
    """

    spec: object
    seed: int
    draws: tuple
    snapshots: np.ndarray = None
    kind: str = "finite"

    @property
    def n(self):
        return len(self.draws)

    @property
    def labels(self):
        if self.kind == "general":
            raise FiniteOnly("general trajectories have numeric points, not labels")
        space = self.spec.space if isinstance(self.spec, UrnSpec) else self.spec[0].space
        return tuple(space.labels[i] for i in self.draws)

    def replay(self):
        """Recompute the predictive snapshots by stepping through ``draws``."""
        if self.kind == "cid":
            nu0, kernel, qseq = self.spec
            return cid_recursion_path(nu0, kernel, qseq, self.draws)
        state = initial_state(self.spec)
        out = [predictive(state).weights]
        for x in self.draws:
            state = step(state, x)
            out.append(predictive(state).weights)
        return np.array(out)

    def predictive_at(self, checkpoints):
        """Predictive vectors after ``n`` draws for each ``n`` in ``checkpoints``."""
        if self.snapshots is not None:
            return self.snapshots[list(checkpoints)]
        if self.kind == "cid":
            return self.replay()[list(checkpoints)]
        spec = self.spec
        _require_finite(spec)
        k = spec.kernel.k
        draws = np.asarray(self.draws, dtype=np.int64)
        out = []
        for n in checkpoints:
            counts = np.bincount(draws[:n], minlength=k).astype(np.float64)
            acc = counts @ spec.kernel.matrix
            tot = counts @ spec.kernel.masses
            out.append((spec.theta * spec.nu.weights + acc) / (spec.theta + tot))
        return np.array(out)


def _inverse_cdf(probs, u):
    """Vectorized categorical draw: row-wise inverse CDF of ``probs`` at ``u``."""
    cdf = np.cumsum(probs, axis=-1)
    idx = (cdf < u[..., None] * cdf[..., -1:]).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def simulate(spec, n, seed, replicate=0, record=True):
    """Sample ``n`` draws sequentially from the predictive recursion."""
    _require_finite(spec)
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = make_rng(seed, replicate)
    live = ~spec.kernel.null_mask
    R = np.where(live[:, None], spec.kernel.matrix, 0.0)
    masses = np.where(live, spec.kernel.masses, 0.0)
    base = spec.theta * spec.nu.weights
    u = rng.random(n)
    acc = np.zeros(spec.kernel.k)
    tot = 0.0
    draws = np.empty(n, dtype=np.int64)
    snaps = np.empty((n + 1, spec.kernel.k)) if record else None
    p = base / spec.theta
    for i in range(n):
        if record:
            snaps[i] = p
        cdf = np.cumsum(p)
        x = min(int(np.count_nonzero(cdf < u[i] * cdf[-1])), len(p) - 1)
        draws[i] = x
        acc += R[x]
        tot += masses[x]
        p = (base + acc) / (spec.theta + tot)
    if record:
        snaps[n] = p
    return Trajectory(spec, seed, tuple(draws.tolist()), snaps)


def simulate_batch(spec, n, replicates, seed, batch=0):
    """``replicates`` independent paths of length ``n`` as an int array (replicates, n)."""
    _require_finite(spec)
    rng = make_rng(seed, batch)
    R, masses = spec.kernel.matrix, spec.kernel.masses
    base = spec.theta * spec.nu.weights
    acc = np.zeros((replicates, spec.kernel.k))
    tot = np.zeros(replicates)
    out = np.empty((replicates, n), dtype=np.int64)
    for i in range(n):
        p = (base + acc) / (spec.theta + tot)[:, None]
        x = _inverse_cdf(p, rng.random(replicates))
        out[:, i] = x
        acc += R[x]
        tot += masses[x]
    return out


def general_simulate_batch(spec, n, replicates, rng):
    """Particle-urn simulation for a GeneralKernel, vectorized over replicates.

    At step i the next point is a fresh base draw with probability
    theta / (theta + D_i); otherwise past particle j is chosen with
    probability f(x_j) / (theta + D_i) and the point is drawn from R_{x_j}.
    """
    kernel = spec.kernel
    pts = np.empty((replicates, n))
    mass = np.empty((replicates, n))
    rows = np.arange(replicates)
    for i in range(n):
        total = spec.theta + mass[:, :i].sum(axis=1)
        u = rng.random(replicates) * total
        new = u < spec.theta
        out = np.empty(replicates)
        if new.any():
            out[new] = kernel.sample_base(rng, int(new.sum()))
        old = ~new
        if old.any():
            cum = np.cumsum(mass[old, :i], axis=1)
            # <= so that zero-mass particles are never selected
            j = (cum <= (u[old] - spec.theta)[:, None]).sum(axis=1)
            j = np.minimum(j, i - 1)
            parents = pts[rows[old], j]
            out[old] = kernel.sample_conditional(parents, rng)
        pts[:, i] = out
        m = kernel.masses(out)
        if not np.all(m < np.inf):
            raise SamplerFailure("unbounded mass encountered")
        mass[:, i] = m
    return pts


def general_simulate(spec, n, seed, replicate=0):
    if spec.is_finite:
        raise ValueError("use simulate() for finite kernels")
    rng = make_rng(seed, replicate)
    pts = general_simulate_batch(spec, n, 1, rng)[0]
    return Trajectory(spec, seed, tuple(float(p) for p in pts), None, kind="general")


def balanced_q(theta):
    """q_n = (theta + n - 1) / (theta + n): the recursion of a canonical balanced MVPS."""
    return lambda n, history: (theta + n - 1.0) / (theta + n)


def cid_recursion_path(nu0, kernel, qseq, draws):
    """Predictives P_0..P_n along ``draws`` for P_n = q_n P_{n-1} + (1 - q_n) R_{X_n}."""
    if not kernel.is_canonical() or kernel.null_mask.any():
        raise HypothesisViolated("the q_n recursion needs a canonical kernel with mass-1 rows")
    P = nu0.weights.astype(np.float64)
    out = [P]
    for n in range(1, len(draws) + 1):
        q = float(qseq(n, tuple(draws[:n])))
        if not 0.0 <= q <= 1.0:
            raise BadQ(f"q_{n} = {q} is outside [0, 1]")
        P = q * P + (1.0 - q) * kernel.matrix[draws[n - 1]]
        out.append(P)
    return np.array(out)


def cid_recursion_simulate(nu0, kernel, qseq, n, seed, replicate=0):
    """Simulate X_{n+1} ~ P_n with the q_n-weighted recursion; keeps all P_n."""
    if not kernel.is_canonical() or kernel.null_mask.any():
        raise HypothesisViolated("the q_n recursion needs a canonical kernel with mass-1 rows")
    rng = make_rng(seed, replicate)
    P = nu0.weights.astype(np.float64)
    draws, snaps = [], [P]
    for i in range(1, n + 1):
        x = int(_inverse_cdf(P, np.array(rng.random())))
        draws.append(x)
        q = float(qseq(i, tuple(draws)))
        if not 0.0 <= q <= 1.0:
            raise BadQ(f"q_{i} = {q} is outside [0, 1]")
        P = q * P + (1.0 - q) * kernel.matrix[x]
        snaps.append(P)
    return Trajectory((nu0, kernel, qseq), seed, tuple(draws), np.array(snaps), kind="cid")


TRAJECTORY_HEADER = "# mvps trajectory v1"


def write_trajectory(traj, path):
    """Line format: '#'-prefixed header (spec hash, seed, n, kind), then one draw per line."""
    if traj.kind == "general":
        lines = [repr(float(p)) for p in traj.draws]
        spec_hash = traj.spec.hash()
    else:
        lines = list(traj.labels)
        spec_hash = traj.spec.hash() if isinstance(traj.spec, UrnSpec) else "cid-recursion"
    with open(path, "w") as fh:
        fh.write(f"{TRAJECTORY_HEADER}\n# spec_hash: {spec_hash}\n# seed: {traj.seed}\n")
        fh.write(f"# n: {traj.n}\n# kind: {traj.kind}\n")
        for line in lines:
            fh.write(line + "\n")


def read_trajectory(path):
    """Return (header dict, list of draws); draws are labels or floats by kind."""
    header, draws = {}, []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != TRAJECTORY_HEADER:
            raise ValueError(f"{path} is not an mvps trajectory file")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                header[key] = value
            elif line:
                draws.append(line)
    header["seed"] = int(header["seed"])
    header["n"] = int(header["n"])
    if header.get("kind") == "general":
        draws = [float(d) for d in draws]
    if len(draws) != header["n"]:
        raise ValueError(f"header says n={header['n']} but file has {len(draws)} draws")
    return header, draws
