import json

import numpy as np
import pytest

from mvps.diagnostics import mean_check, two_point_check
from mvps.errors import BadNullSet, BadPartition, HypothesisViolated
from mvps.exactlaw import joint_law
from mvps.general import delta_kernel, symmetrized_kernel
from mvps.kernel import FiniteKernel, Partition
from mvps.measure import FiniteSpace, ProbabilityVector, dp_product_moment
from mvps.prior import (
    hierarchical_two_point_law,
    posterior_parameters,
    sample_dp,
    sample_dp_batch,
    sample_hierarchical,
    sample_hierarchical_batch,
    sample_kernel_sb,
    sample_kernel_sb_batch,
    sample_null_mixture,
    sample_null_mixture_batch,
    sample_posterior,
    sample_posterior_batch,
    truncation_level,
    _sticks,
)
from mvps.seeding import make_rng
from mvps.urn import predictive_after


def test_truncation_examples():
    J, r = truncation_level(2.0, 1e-8)
    assert J == 46
    assert abs(r - (2 / 3) ** 46) <= 1e-15 * (2 / 3) ** 46
    assert truncation_level(1e-9, 0.5)[0] == 1
    assert truncation_level(1.0, 0.5**10)[0] == 10
    with pytest.raises(ValueError):
        truncation_level(1.0, 1.5)
    with pytest.raises(ValueError):
        truncation_level(0.0, 0.1)


def test_stick_identity():
    W, V, res = _sticks(1.5, 30, 1000, make_rng(0))
    np.testing.assert_allclose(V.sum(axis=1) + res, 1.0, atol=1e-12)
    assert np.all(V >= 0) and np.all((W >= 0) & (W <= 1))


def test_first_stick_mean():
    _, V, _ = _sticks(1.0, 5, 100_000, make_rng(1))
    v1 = V[:, 0]
    assert abs(v1.mean() - 0.5) <= 3 * v1.std(ddof=1) / np.sqrt(len(v1))


def test_single_draws_are_probabilities(nu3, block3):
    m = sample_kernel_sb(1.0, nu3, block3[0].kernel, seed=3).measure
    assert abs(m.weights.sum() - 1) <= 1e-12
    d = sample_dp(1.0, nu3, seed=2)
    assert d.weights.sum() + d.residual == pytest.approx(1.0, abs=1e-12)
    assert json.loads(d.to_json())["atoms"][0] in nu3.space.labels


def test_delta_kernel_reduces_to_dp(nu3):
    I = FiniteKernel.identity(nu3.space)
    a = sample_kernel_sb(1.0, nu3, I, J=40, seed=5).measure.weights
    from mvps.prior import dp_measure

    b = dp_measure(sample_dp(1.0, nu3, J=40, seed=5), nu3).weights
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_prior_means(nu3, block3):
    K = block3[0].kernel
    assert mean_check(sample_dp_batch(1.0, nu3, 100_000, seed=6), nu3.weights).passed
    P = sample_kernel_sb_batch(1.0, nu3, K, 100_000, seed=7)
    assert mean_check(P, nu3.weights).passed


def test_kernel_sb_product_moment(nu3, block3):
    spec, part = block3
    P = sample_kernel_sb_batch(1.0, nu3, spec.kernel, 100_000, seed=8)
    prod = P[:, 0] * P[:, 2]
    exact = hierarchical_two_point_law(1.0, nu3, part)[0, 2]
    # composed by hand from DP moments: nu(1|B1) nu(3|B2) E[Q_1 Q_2]
    q = ProbabilityVector(FiniteSpace(("B1", "B2")), [0.5, 0.5])
    assert exact == pytest.approx(0.5 * 1.0 * dp_product_moment(1.0, q, "B1", "B2"), abs=1e-15)
    assert abs(prod.mean() - exact) <= 3 * prod.std(ddof=1) / np.sqrt(len(prod))


def test_posterior_mean_matches_predictive(block3, ps_spec):
    spec, _ = block3
    data = ["1", "3", "3"]
    P = sample_posterior_batch(1.0, spec.nu, spec.kernel, data, 100_000, seed=9)
    assert mean_check(P, predictive_after(spec, data).weights).passed
    P = sample_posterior_batch(1.0, ps_spec.nu, ps_spec.kernel, ["0"], 100_000, seed=10)
    assert mean_check(P, [0.75, 0.25]).passed


def test_posterior_with_no_data_is_the_prior(block3):
    spec, _ = block3
    a = sample_posterior(1.0, spec.nu, spec.kernel, [], seed=11).measure.weights
    b = sample_kernel_sb(1.0, spec.nu, spec.kernel, seed=11).measure.weights
    np.testing.assert_array_equal(a, b)
    theta, nu = posterior_parameters(1.0, spec.nu, spec.kernel, [])
    assert theta == 1.0 and np.array_equal(nu.weights, spec.nu.weights)


def test_kernel_sb_hypotheses(null3, cid_kernel, cid_nu):
    spec, _ = null3
    with pytest.raises(HypothesisViolated):
        sample_kernel_sb(1.0, spec.nu, spec.kernel)
    with pytest.raises(HypothesisViolated):
        sample_kernel_sb(1.0, cid_nu, cid_kernel)


def test_general_kernel_draws():
    draw = sample_kernel_sb(1.0, None, symmetrized_kernel(), J=30, seed=12)
    pts = draw.sample(1000, make_rng(0))
    assert pts.shape == (1000,) and np.all(np.isfinite(pts))
    post = sample_posterior(1.0, None, delta_kernel(), [0.3, -1.2], J=30, seed=13)
    assert post.sb.theta == 3.0


def test_hierarchical_one_block_is_iid(nu3):
    part = Partition.whole(nu3.space)
    law = hierarchical_two_point_law(1.0, nu3, part)
    np.testing.assert_allclose(law, np.outer(nu3.weights, nu3.weights), atol=1e-15)
    s = sample_hierarchical(1.0, nu3, part, 5, seed=1)
    assert np.all(s.labels == 0)


def test_hierarchical_oracle_matches_enumeration(block3):
    spec, part = block3
    np.testing.assert_allclose(hierarchical_two_point_law(1.0, spec.nu, part), joint_law(spec, 2).probs, atol=1e-12)


def test_hierarchical_two_point_law(block3):
    spec, part = block3
    _, X = sample_hierarchical_batch(1.0, spec.nu, part, 2, 200_000, seed=14)
    assert two_point_check(X, joint_law(spec, 2).probs).passed


def test_null_mixture_frequencies(null3):
    spec, part = null3
    p, xi, X = sample_null_mixture_batch(1.0, spec.nu, part, ["3"], 2, 200_000, seed=15)
    assert two_point_check(X, joint_law(spec, 2).probs).passed
    in_z = (X == 2).ravel().astype(float)
    assert abs(in_z.mean() - 0.5) <= 3 * in_z.std(ddof=1) / np.sqrt(len(in_z))
    assert np.array_equal(X[~xi], np.full((~xi).sum(), 2))


def test_null_mixture_errors(nu3):
    part = Partition.singletons(nu3.space)
    with pytest.raises(BadNullSet):
        sample_null_mixture(1.0, nu3, part, [], 2)
    with pytest.raises(BadNullSet):
        sample_null_mixture(1.0, nu3, part, ["1", "2", "3"], 2)
    with pytest.raises(BadPartition):
        sample_null_mixture(1.0, nu3, Partition.from_labels(nu3.space, [["1"], ["2", "3"]]), ["3"], 2)


def test_batches_are_deterministic(nu3, null3):
    a = sample_dp_batch(1.0, nu3, 1000, seed=3)
    np.testing.assert_array_equal(a, sample_dp_batch(1.0, nu3, 1000, seed=3))
    spec, part = null3
    x1 = sample_null_mixture_batch(1.0, spec.nu, part, ["3"], 2, 500, seed=4)[2]
    x2 = sample_null_mixture_batch(1.0, spec.nu, part, ["3"], 2, 500, seed=4)[2]
    np.testing.assert_array_equal(x1, x2)
    s = sample_null_mixture(1.0, spec.nu, part, ["3"], 4, seed=2)
    d = s.to_dict(spec.nu.space, part)
    assert len(d["samples"]) == 4 and len(d["xi"]) == 4
    np.testing.assert_allclose(s.sb.weights.sum() + s.sb.residual, 1.0, atol=1e-12)
