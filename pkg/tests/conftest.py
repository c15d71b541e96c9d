import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

from mvps.kernel import FiniteKernel, Partition, exchangeable_kernel_from_partition
from mvps.measure import FiniteSpace, ProbabilityVector
from mvps.urn import UrnSpec

settings.register_profile("repo", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("repo")

NU1, NU2 = 0.2, 0.3


def fraction_tuple_prob(theta, nu, R, tup):
    """Product of predictives in exact rational arithmetic (independent oracle)."""
    theta = Fraction(theta)
    nu = [Fraction(x) for x in nu]
    R = [[Fraction(x) for x in row] for row in R]
    k = len(nu)
    acc = [Fraction(0)] * k
    tot = Fraction(0)
    p = Fraction(1)
    for x in tup:
        p *= (theta * nu[x] + acc[x]) / (theta + tot)
        acc = [a + r for a, r in zip(acc, R[x])]
        tot += sum(R[x])
    return p


def fraction_law(theta, nu, R, n):
    k = len(nu)
    return {t: fraction_tuple_prob(theta, nu, R, t) for t in itertools.product(range(k), repeat=n)}


@pytest.fixture
def cid_kernel():
    return FiniteKernel.from_rows(
        ["1", "2", "3", "4"],
        [[NU1, NU2, 0, 0], [2 * NU1, 2 * NU2, 0, 0], [0, 0, NU1, NU2], [0, 0, 2 * NU1, 2 * NU2]],
    )


@pytest.fixture
def cid_nu(cid_kernel):
    return ProbabilityVector(cid_kernel.space, [NU1, NU2, NU1, NU2])


@pytest.fixture
def cid_spec(cid_kernel, cid_nu):
    return UrnSpec(1.0, cid_nu, cid_kernel)


@pytest.fixture
def ps_spec():
    space = FiniteSpace.integers(2)
    return UrnSpec(1.0, ProbabilityVector.uniform(space), FiniteKernel.identity(space))


@pytest.fixture
def nu3():
    return ProbabilityVector(FiniteSpace(("1", "2", "3")), [0.25, 0.25, 0.5])


@pytest.fixture
def block3(nu3):
    part = Partition.from_labels(nu3.space, [["1", "2"], ["3"]])
    return UrnSpec(1.0, nu3, exchangeable_kernel_from_partition(nu3, part)), part


@pytest.fixture
def null3(nu3):
    part = Partition.singletons(nu3.space)
    return UrnSpec(1.0, nu3, exchangeable_kernel_from_partition(nu3, part, ["3"])), part


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
