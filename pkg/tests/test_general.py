import numpy as np
import pytest

from mvps.errors import SamplerFailure
from mvps.general import (
    GeneralKernel,
    builtin_kernel,
    check_atom_preservation,
    delta_kernel,
    halfline,
    histogram_kernel,
    mc_kernel_check,
    shifted_kernel,
    symmetrized_kernel,
)

TEST_SETS = [halfline(t) for t in (-1.0, 0.0, 1.0)]


def test_delta_kernel_passes():
    rep = mc_kernel_check(delta_kernel(), TEST_SETS, 20_000, seed=1)
    assert rep.passed and rep.max_residual == 0.0


def test_symmetrized_kernel_passes():
    rep = mc_kernel_check(symmetrized_kernel(), TEST_SETS, 100_000, seed=2)
    assert rep.passed
    assert {r["condition"] for r in rep.details["estimates"]} == {"stationarity", "self_averaging"}


def test_shifted_kernel_fails_by_a_wide_margin():
    # N(0.5, 1) moves P(x <= 0) from 0.5 to about 0.31; at N = 1e5 that is far beyond 10 SE
    rep = mc_kernel_check(shifted_kernel(0.5), [halfline(0.0)], 100_000, seed=3)
    assert not rep.passed
    assert rep.max_residual > 10
    assert rep.witness["condition"] == "stationarity"


def test_histogram_kernel_is_stationary_and_preserves_bins():
    k = histogram_kernel([-1.0, 0.0, 1.0])
    assert mc_kernel_check(k, TEST_SETS + [halfline(0.5)], 100_000, seed=4).passed
    assert check_atom_preservation(k, 50_000, seed=5).passed


def test_symmetrized_preserves_absolute_value():
    assert check_atom_preservation(symmetrized_kernel(), 50_000, seed=6).passed


def test_mc_check_argument_errors():
    with pytest.raises(ValueError):
        mc_kernel_check(delta_kernel(), TEST_SETS, 50, seed=0)
    with pytest.raises(ValueError):
        mc_kernel_check(delta_kernel(), [], 1000, seed=0)


def test_sampler_failure_is_wrapped():
    def broken(rng, size):
        raise RuntimeError("boom")

    k = GeneralKernel(broken, lambda x: np.ones(len(x)), lambda x, rng: x)
    with pytest.raises(SamplerFailure):
        k.sample_base(np.random.default_rng(0), 3)
    bad_shape = GeneralKernel(lambda rng, size: np.zeros(size + 1), lambda x: np.ones(len(x)), lambda x, rng: x)
    with pytest.raises(SamplerFailure):
        bad_shape.sample_base(np.random.default_rng(0), 3)
    negative = GeneralKernel(lambda rng, size: np.zeros(size), lambda x: -np.ones(len(x)), lambda x, rng: x)
    with pytest.raises(SamplerFailure):
        negative.masses(np.zeros(2))


def test_builtin_lookup():
    assert builtin_kernel("histogram", edges=[0.0]).params == {"edges": [0.0]}
    with pytest.raises(KeyError):
        builtin_kernel("nope")


def test_mc_check_deterministic():
    a = mc_kernel_check(symmetrized_kernel(), TEST_SETS, 5_000, seed=9)
    b = mc_kernel_check(symmetrized_kernel(), TEST_SETS, 5_000, seed=9)
    assert a.to_json() == b.to_json()
