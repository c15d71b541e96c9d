"""Property tests over randomized finite instances."""

import itertools

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from mvps.exactlaw import check_cid, check_cid_structure, check_exchangeable, joint_law, structurally_exchangeable
from mvps.instances import (
    balanced_canonical_instance,
    cid_structured_instance,
    exchangeable_instance,
    idempotent_with_transients,
    perturb_entry,
    proper_block_kernel,
    random_nu,
)
from mvps.kernel import (
    FiniteKernel,
    Partition,
    atoms_of_kernel,
    canonicalize,
    check_proper,
    check_self_averaging,
    exchangeable_kernel_from_partition,
)
from mvps.measure import FiniteSpace, ProbabilityVector, tv_distance
from mvps.urn import UrnSpec, predictive_after

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(2, 5)


@given(seeds, sizes)
def test_block_kernels_are_exchangeable(seed, k):
    rng = np.random.default_rng(seed)
    K, nu, part = exchangeable_instance(k, rng)
    spec = UrnSpec(float(rng.uniform(0.2, 4.0)), nu, K)
    assert structurally_exchangeable(K, nu)
    assert check_exchangeable(spec, 4).passed
    assert check_cid(spec, 4).passed


@given(seeds, sizes)
def test_exchangeable_is_cid(seed, k):
    rng = np.random.default_rng(seed)
    K, nu, _ = balanced_canonical_instance(k, rng)
    spec = UrnSpec(1.0, nu, K)
    if check_exchangeable(spec, 3).passed:
        assert check_cid(spec, 3).passed


@given(seeds)
def test_cid_structure_implies_cid(seed):
    rng = np.random.default_rng(seed)
    K, nu = cid_structured_instance(rng)
    assert check_cid_structure(K, nu).passed
    assert check_cid(UrnSpec(1.0, nu, K), 3).passed


@given(seeds, sizes)
def test_perturbation_breaks_structure(seed, k):
    rng = np.random.default_rng(seed)
    K, nu, _ = exchangeable_instance(k, rng, scale=1.0)
    bad = perturb_entry(K, rng)
    assert not structurally_exchangeable(bad, nu)
    assert not check_exchangeable(UrnSpec(1.0, nu, bad), 4).passed


@given(seeds, sizes)
def test_canonicalize_is_idempotent(seed, k):
    rng = np.random.default_rng(seed)
    R = rng.uniform(0, 2, size=(k, k))
    R[rng.random((k, k)) < 0.3] = 0.0
    K = FiniteKernel(FiniteSpace.integers(k), R)
    once = canonicalize(K)
    assert np.array_equal(canonicalize(once).matrix, once.matrix)
    live = ~K.null_mask
    np.testing.assert_allclose(once.masses[live], 1.0, atol=1e-12)


@given(seeds, sizes, st.integers(0, 3))
def test_joint_law_is_a_probability(seed, k, n):
    rng = np.random.default_rng(seed)
    nu = random_nu(k, rng)
    K = FiniteKernel(nu.space, rng.uniform(0, 1, size=(k, k)))
    law = joint_law(UrnSpec(float(rng.uniform(0.2, 3)), nu, K), n)
    assert abs(law.probs.sum() - 1) <= 1e-12 and np.all(law.probs >= 0)


@given(seeds, sizes)
def test_idempotent_kernels_are_self_averaging(seed, k):
    rng = np.random.default_rng(seed)
    K = idempotent_with_transients(k, rng)
    np.testing.assert_allclose(K.matrix @ K.matrix, K.matrix, atol=1e-12)
    nu = ProbabilityVector(K.space, random_nu(k, rng).weights)
    assert check_self_averaging(K, nu).passed


@given(seeds, sizes)
def test_proper_block_kernels_are_proper_on_atoms(seed, k):
    rng = np.random.default_rng(seed)
    K, part = proper_block_kernel(k, rng)
    nu = ProbabilityVector(K.space, random_nu(k, rng).weights)
    assert check_proper(K, nu, part).passed
    assert check_proper(K, nu, atoms_of_kernel(K)).passed


@given(seeds, st.integers(0, 4))
def test_null_part_predictive_is_frozen(seed, n):
    rng = np.random.default_rng(seed)
    nu = random_nu(4, rng)
    part = Partition.from_labels(nu.space, [["1", "2"], ["3"], ["4"]])
    K = exchangeable_kernel_from_partition(nu, part, ["4"])
    spec = UrnSpec(float(rng.uniform(0.2, 3)), nu, K)
    for hist in itertools.product(["1", "2", "3"], repeat=n):
        # bit-exact only for dyadic weights; otherwise equal up to rounding
        assert abs(predictive_after(spec, hist).weights[3] - nu.weights[3]) <= 1e-15


@given(seeds, sizes)
def test_tv_is_a_metric_on_probabilities(seed, k):
    rng = np.random.default_rng(seed)
    p, q, r = (random_nu(k, rng) for _ in range(3))
    assert tv_distance(p, p) == 0.0
    assert tv_distance(p, q) == tv_distance(q, p)
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-15
