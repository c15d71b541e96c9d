"""Reinforcement kernels on general (here: real-line) spaces.

A GeneralKernel is described by samplers rather than by a matrix.  All
procedures are vectorized and receive an explicit ``numpy.random.Generator``:

* ``base_sampler(rng, size)`` draws ``size`` points from nu;
* ``mass_fn(points)`` returns f(x) = R_x(X) for each point;
* ``conditional_sampler(points, rng)`` draws one point from R_x / R_x(X) for
  each input point;
* ``atom_map(points)`` (optional) returns the atom label pi(x).

Builtin kernels use a standard normal base measure unless stated otherwise.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .calibration import CALIBRATION
from .errors import SamplerFailure
from .report import CheckReport
from .seeding import as_rng


@dataclass(frozen=True)
class GeneralKernel:
    base_sampler: object
    mass_fn: object
    conditional_sampler: object
    atom_map: object = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def sample_base(self, rng, size):
        return _guard(self.base_sampler, rng, int(size), expect=int(size))

    def masses(self, points):
        points = np.asarray(points, dtype=np.float64)
        f = np.asarray(_guard(self.mass_fn, points, expect=points.shape[0]), dtype=np.float64)
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise SamplerFailure(f"mass_fn of {self.name} returned a negative or non-finite mass")
        return f

    def sample_conditional(self, points, rng):
        points = np.asarray(points, dtype=np.float64)
        return _guard(self.conditional_sampler, points, rng, expect=points.shape[0])

    def describe(self):
        return {"builtin": self.name, "params": dict(self.params)}


def _guard(fn, *args, expect):
    try:
        out = np.asarray(fn(*args), dtype=np.float64)
    except SamplerFailure:
        raise
    except Exception as exc:  # user procedures may fail in arbitrary ways
        raise SamplerFailure(f"{getattr(fn, '__name__', fn)} failed: {exc}") from exc
    if out.shape != (expect,):
        raise SamplerFailure(f"sampler returned shape {out.shape}, expected ({expect},)")
    return out


def _normal_base(rng, size):
    return rng.standard_normal(size)


def _unit_mass(points):
    return np.ones(len(points))


def delta_kernel():
    """R_x = delta_x: the Blackwell-MacQueen urn with a diffuse base."""
    return GeneralKernel(
        base_sampler=_normal_base,
        mass_fn=_unit_mass,
        conditional_sampler=lambda x, rng: np.array(x, dtype=np.float64),
        atom_map=lambda x: np.asarray(x, dtype=np.float64),
        name="delta",
    )


def invariant_kernel(group, name="invariant", params=None):
    """R_x = uniform over the orbit {g(x) : g in group} of a finite group of maps."""
    group = tuple(group)

    def conditional(x, rng):
        x = np.asarray(x, dtype=np.float64)
        choice = rng.integers(len(group), size=x.shape[0])
        out = np.empty_like(x)
        for j, g in enumerate(group):
            sel = choice == j
            out[sel] = g(x[sel])
        return out

    def orbit_label(x):
        x = np.asarray(x, dtype=np.float64)
        images = np.stack([g(x) for g in group])
        return images.min(axis=0)

    return GeneralKernel(
        base_sampler=_normal_base,
        mass_fn=_unit_mass,
        conditional_sampler=conditional,
        atom_map=orbit_label,
        name=name,
        params=params or {},
    )


def symmetrized_kernel():
    """R_x = (delta_x + delta_{-x}) / 2 with a symmetric (standard normal) base."""
    k = invariant_kernel((lambda x: x, lambda x: -x), name="symmetrized")
    return GeneralKernel(
        base_sampler=k.base_sampler,
        mass_fn=k.mass_fn,
        conditional_sampler=k.conditional_sampler,
        atom_map=np.abs,
        name="symmetrized",
    )


def histogram_kernel(edges):
    """R_x = nu(.|D) for the bin D containing x; bins cut the real line at ``edges``.

    The base is standard normal and in-bin draws use the inverse CDF.
    """
    edges = np.sort(np.asarray(edges, dtype=np.float64))
    cdf_edges = np.concatenate(([0.0], ndtr(edges), [1.0]))

    def bin_of(x):
        return np.searchsorted(edges, np.asarray(x, dtype=np.float64), side="right")

    def conditional(x, rng):
        b = bin_of(x)
        lo, hi = cdf_edges[b], cdf_edges[b + 1]
        u = lo + (hi - lo) * rng.random(len(b))
        y = ndtri(u)
        # inverse-CDF rounding can land a hair outside the bin
        lo_x = np.concatenate(([-np.inf], edges))[b]
        hi_x = np.concatenate((edges, [np.inf]))[b]
        return np.clip(y, lo_x, np.nextafter(hi_x, -np.inf))

    return GeneralKernel(
        base_sampler=_normal_base,
        mass_fn=_unit_mass,
        conditional_sampler=conditional,
        atom_map=lambda x: bin_of(x).astype(np.float64),
        name="histogram",
        params={"edges": edges.tolist()},
    )


def shifted_kernel(shift):
    """R_x = N(shift, 1) for every x: deliberately not stationary w.r.t. N(0, 1)."""
    shift = float(shift)
    return GeneralKernel(
        base_sampler=_normal_base,
        mass_fn=_unit_mass,
        conditional_sampler=lambda x, rng: shift + rng.standard_normal(len(x)),
        name="shifted",
        params={"shift": shift},
    )


BUILTINS = {
    "delta": lambda **p: delta_kernel(),
    "symmetrized": lambda **p: symmetrized_kernel(),
    "histogram": lambda edges=(-1.0, 0.0, 1.0), **p: histogram_kernel(edges),
    "shifted": lambda shift=0.5, **p: shifted_kernel(shift),
}


def builtin_kernel(name, **params):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin kernel {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)


def halfline(t):
    """Test-set predicate for (-inf, t]."""
    t = float(t)

    def pred(x):
        return np.asarray(x) <= t

    pred.__name__ = f"(-inf,{t:g}]"
    return pred


def _named(test_sets):
    if isinstance(test_sets, dict):
        return list(test_sets.items())
    return [(getattr(A, "__name__", f"A{i}"), A) for i, A in enumerate(test_sets)]


def _zscore(diff):
    mean = float(diff.mean())
    se = float(diff.std(ddof=1) / np.sqrt(len(diff)))
    if se == 0.0:
        z = 0.0 if mean == 0.0 else np.inf
    else:
        z = abs(mean) / se
    return mean, se, z


def mc_kernel_check(kernel, test_sets, N, seed, z_max=None):
    """Monte Carlo check of stationarity and self-averaging of a general kernel.

    With x ~ nu, y ~ R_x and z ~ R_y (normalized kernel):

    * stationarity, per test set A: E[1_A(y) - 1_A(x)] = 0;
    * self-averaging, per pair (A, B) with B a test set or the whole space:
      E[1_B(x) (1_A(z) - 1_A(y))] = 0.

    Each mean is standardized by its standard error; the check passes when
    every |z-score| is at most ``z_max`` (default 4).
    """
    if N < 100:
        raise ValueError("mc_kernel_check needs N >= 100")
    sets = _named(test_sets)
    if not sets:
        raise ValueError("at least one test set is required")
    z_max = CALIBRATION.z_max if z_max is None else z_max
    rng = as_rng(seed)
    x = kernel.sample_base(rng, N)
    kernel.masses(x)
    y = kernel.sample_conditional(x, rng)
    z = kernel.sample_conditional(y, rng)

    rows, worst, witness = [], 0.0, None
    for name, A in sets:
        ax, ay, az = (np.asarray(A(p), dtype=np.float64) for p in (x, y, z))
        mean, se, zs = _zscore(ay - ax)
        rows.append({"condition": "stationarity", "A": name, "B": "X", "estimate": mean, "se": se, "z": zs})
        for bname, B in [("X", None)] + sets:
            bx = 1.0 if B is None else np.asarray(B(x), dtype=np.float64)
            mean, se, zs2 = _zscore(bx * (az - ay))
            rows.append(
                {"condition": "self_averaging", "A": name, "B": bname, "estimate": mean, "se": se, "z": zs2}
            )
    for r in rows:
        if r["z"] > worst:
            worst, witness = r["z"], r
    return CheckReport(
        "mc_kernel",
        worst,
        z_max,
        witness if worst > z_max else None,
        {"N": N, "kernel": kernel.describe(), "estimates": rows},
    )


def check_atom_preservation(kernel, N, seed):
    """Fraction of sampled pairs (x, y ~ R_x) whose atom labels differ (must be 0)."""
    if kernel.atom_map is None:
        raise ValueError("kernel has no atom_map")
    rng = as_rng(seed)
    x = kernel.sample_base(rng, N)
    y = kernel.sample_conditional(x, rng)
    ax = np.asarray(kernel.atom_map(x))
    ay = np.asarray(kernel.atom_map(y))
    bad = ~np.isclose(ax, ay, rtol=0.0, atol=1e-12)
    witness = None
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        witness = {"x": float(x[i]), "y": float(y[i])}
    return CheckReport("atom_preservation", float(bad.mean()), 0.0, witness, {"N": N})
