"""Finite measures over labeled finite spaces.

States are addressed by integer index inside the numeric core and by string
label at the edges.  Every comparison of masses or probabilities uses the
single absolute tolerance ``TOL``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadCoefficients, SpaceMismatch, ZeroMass

TOL = 1e-12


def _frozen(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FiniteSpace:
    labels: tuple

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        if not labels:
            raise ValueError("a finite space needs at least one state")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate state labels in {labels}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_lookup", {label: i for i, label in enumerate(labels)})

    @classmethod
    def integers(cls, k, start=0):
        return cls(tuple(str(i) for i in range(start, start + k)))

    @property
    def k(self):
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    def index(self, state):
        """Index of ``state``, given either as a label or as an integer index."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < self.k:
                raise IndexError(f"state index {state} outside 0..{self.k - 1}")
            return int(state)
        try:
            return self._lookup[str(state)]
        except KeyError:
            raise KeyError(f"unknown state label {state!r}") from None

    def indices(self, states):
        return [self.index(s) for s in states]

    def label(self, i):
        return self.labels[i]


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Non-negative weight vector over ``space``."""

    space: FiniteSpace
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.shape != (self.space.k,):
            raise ValueError(f"expected {self.space.k} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError(f"weights must be non-negative, got {w}")
        object.__setattr__(self, "weights", w)

    @property
    def total(self):
        return float(self.weights.sum())

    def __getitem__(self, state):
        return float(self.weights[self.space.index(state)])

    def mass(self, states):
        return float(self.weights[self.space.indices(states)].sum())

    def restrict(self, states):
        """Measure that agrees with ``self`` on ``states`` and is zero elsewhere."""
        w = np.zeros(self.space.k)
        idx = self.space.indices(states)
        w[idx] = self.weights[idx]
        return FiniteMeasure(self.space, w)

    def __add__(self, other):
        _same_space(self, other)
        return FiniteMeasure(self.space, self.weights + other.weights)

    def __mul__(self, c):
        return FiniteMeasure(self.space, float(c) * self.weights)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, FiniteMeasure)
            and self.space == other.space
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.space, self.weights.tobytes()))

    def as_dict(self):
        return {label: float(w) for label, w in zip(self.space.labels, self.weights)}

    def __repr__(self):
        return f"{type(self).__name__}({self.as_dict()})"


class ProbabilityVector(FiniteMeasure):
    """A FiniteMeasure whose total mass is 1 within ``TOL``."""

    def __post_init__(self):
        super().__post_init__()
        if abs(self.total - 1.0) > TOL:
            raise ValueError(f"probability vector sums to {self.total!r}, not 1")

    @classmethod
    def uniform(cls, space):
        return cls(space, np.full(space.k, 1.0 / space.k))

    @classmethod
    def point_mass(cls, space, state):
        w = np.zeros(space.k)
        w[space.index(state)] = 1.0
        return cls(space, w)

    def conditional(self, states):
        """The conditional law given the event ``states``."""
        return normalize(self.restrict(states))


def _same_space(p, q):
    if p.space != q.space:
        raise SpaceMismatch(f"{p.space.labels} vs {q.space.labels}")


def normalize(m):
    """Scale ``m`` to a probability vector.  Raises ZeroMass on the zero measure."""
    if isinstance(m, ProbabilityVector):
        return m
    total = m.weights.sum()
    if total <= 0:
        raise ZeroMass("cannot normalize a measure with zero total mass")
    return ProbabilityVector(m.space, m.weights / total)


def tv_distance(p, q):
    """Total variation distance, i.e. half the L1 distance of the weights."""
    _same_space(p, q)
    return float(min(1.0, 0.5 * np.abs(p.weights - q.weights).sum()))


def mix(coeffs, measures):
    """Convex combination of probability vectors on a common space."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if len(coeffs) != len(measures) or len(measures) == 0:
        raise BadCoefficients("need one coefficient per measure")
    if np.any(coeffs < 0) or abs(coeffs.sum() - 1.0) > TOL:
        raise BadCoefficients(f"coefficients {coeffs} are not a probability vector")
    for m in measures[1:]:
        _same_space(measures[0], m)
    w = sum(c * m.weights for c, m in zip(coeffs, measures))
    return ProbabilityVector(measures[0].space, w)


def dp_product_moment(theta, nu, a, b):
    """E[P(a) P(b)] for P ~ DP(theta, nu).

    Equals (theta nu(a) nu(b) + nu(a) [a == b]) / (theta + 1).
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    i, j = nu.space.index(a), nu.space.index(b)
    na, nb = nu.weights[i], nu.weights[j]
    return float((theta * na * nb + (na if i == j else 0.0)) / (theta + 1.0))
