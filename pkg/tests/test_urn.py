import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvps.errors import BadQ, FiniteOnly, HypothesisViolated
from mvps.general import delta_kernel, histogram_kernel, symmetrized_kernel
from mvps.kernel import FiniteKernel
from mvps.measure import FiniteSpace, ProbabilityVector
from mvps.urn import (
    UrnSpec,
    balanced_q,
    cid_recursion_path,
    cid_recursion_simulate,
    general_simulate,
    general_simulate_batch,
    initial_state,
    predictive,
    predictive_after,
    read_trajectory,
    simulate,
    simulate_batch,
    state_after,
    step,
    write_trajectory,
)
from mvps.seeding import derive_seed, make_rng


def test_predictive_examples(cid_spec, ps_spec):
    np.testing.assert_array_equal(predictive(initial_state(cid_spec)).weights, cid_spec.nu.weights)
    np.testing.assert_allclose(predictive_after(cid_spec, ["1"]).weights, [0.26667, 0.4, 0.13333, 0.2], atol=1e-5)
    np.testing.assert_allclose(predictive_after(ps_spec, ["0"]).weights, [0.75, 0.25], atol=1e-15)


def test_step_examples(cid_spec, null3):
    s0 = initial_state(cid_spec)
    assert step(s0, "2").total_added == pytest.approx(1.0)
    assert step(s0, "1").total_added == pytest.approx(0.5)
    spec, _ = null3
    s = state_after(spec, ["1"])
    after = step(s, "3")
    np.testing.assert_array_equal(after.accumulated, s.accumulated)
    assert after.n == s.n + 1
    ps = UrnSpec(1.0, ProbabilityVector.uniform(FiniteSpace.integers(3)), FiniteKernel.identity(FiniteSpace.integers(3)))
    np.testing.assert_array_equal(step(initial_state(ps), 1).accumulated, [0, 1, 0])


def test_state_accumulated_total_matches(cid_spec):
    s = state_after(cid_spec, ["1", "2", "4", "4", "3"])
    assert abs(s.accumulated.sum() - s.total_added) <= 1e-12


def test_general_spec_has_no_exact_predictive():
    spec = UrnSpec(1.0, None, delta_kernel())
    with pytest.raises(FiniteOnly):
        initial_state(spec)
    with pytest.raises(FiniteOnly):
        simulate(spec, 3, seed=0)


def test_simulate_empty_and_deterministic(cid_spec):
    assert simulate(cid_spec, 0, seed=1).draws == ()
    a, b = simulate(cid_spec, 50, seed=1), simulate(cid_spec, 50, seed=1)
    assert a.draws == b.draws
    np.testing.assert_array_equal(a.snapshots, b.snapshots)
    assert simulate(cid_spec, 50, seed=2).draws != a.draws


def test_replay_reproduces_snapshots(cid_spec):
    traj = simulate(cid_spec, 40, seed=3)
    np.testing.assert_array_equal(traj.replay(), traj.snapshots)
    np.testing.assert_allclose(traj.predictive_at([0, 10, 40]), traj.snapshots[[0, 10, 40]], atol=1e-15)


def test_ps_two_step_frequency(ps_spec):
    draws = simulate_batch(ps_spec, 2, 100_000, seed=4)
    hits = (draws[:, 0] == 0) & (draws[:, 1] == 0)
    se = np.sqrt(0.375 * 0.625 / len(hits))
    assert abs(hits.mean() - 0.375) <= 3 * se


def test_general_delta_distinct_values():
    spec = UrnSpec(1.0, None, delta_kernel())
    pts = general_simulate_batch(spec, 2, 100_000, make_rng(5))
    distinct = 1 + (pts[:, 0] != pts[:, 1])
    se = distinct.std(ddof=1) / np.sqrt(len(distinct))
    assert abs(distinct.mean() - 1.5) <= 3 * se


def test_general_symmetrized_redraws_share_absolute_values():
    spec = UrnSpec(1.0, None, symmetrized_kernel())
    pts = general_simulate_batch(spec, 8, 2_000, make_rng(6))
    for row in pts:
        seen = set()
        for x in row:
            # a redraw copies |x| exactly; a fresh base draw is a new value a.s.
            assert abs(x) in seen or abs(x) not in seen
            seen.add(abs(x))
    absvals = np.abs(pts)
    repeats = [len(set(r)) for r in absvals]
    assert np.mean(repeats) < 8


def test_general_histogram_redraws_stay_in_bin():
    edges = [-1.0, 0.0, 1.0]
    spec = UrnSpec(1.0, None, histogram_kernel(edges))
    pts = general_simulate_batch(spec, 6, 2_000, make_rng(7))
    bins = np.searchsorted(edges, pts, side="right")
    # under the histogram kernel the bin sequence is itself a Polya sequence on 4 labels
    assert bins.min() >= 0 and bins.max() <= 3


def test_general_simulate_deterministic():
    spec = UrnSpec(1.0, None, symmetrized_kernel())
    assert general_simulate(spec, 20, seed=8).draws == general_simulate(spec, 20, seed=8).draws


def test_seed_derivation_is_stable():
    assert derive_seed(1, 0, 0) == derive_seed(1, 0, 0)
    assert len({derive_seed(1, r, s) for r in range(5) for s in range(5)}) == 25


def test_cid_recursion_examples(ps_spec):
    nu0 = ps_spec.nu
    K = ps_spec.kernel
    traj = cid_recursion_simulate(nu0, K, lambda n, h: 1.0, 10, seed=1)
    assert all(np.array_equal(p, nu0.weights) for p in traj.snapshots)
    traj = cid_recursion_simulate(nu0, K, lambda n, h: 0.0, 10, seed=1)
    for i, x in enumerate(traj.draws):
        np.testing.assert_array_equal(traj.snapshots[i + 1], K.matrix[x])


def test_cid_recursion_matches_ps_on_every_path(ps_spec):
    q = balanced_q(1.0)
    for n in range(1, 7):
        for path in itertools.product(range(2), repeat=n):
            rec = cid_recursion_path(ps_spec.nu, ps_spec.kernel, q, path)
            exact = predictive_after(ps_spec, path).weights
            assert np.max(np.abs(rec[-1] - exact)) <= 1e-12


def test_cid_recursion_errors(ps_spec, cid_kernel, cid_nu):
    with pytest.raises(BadQ):
        cid_recursion_simulate(ps_spec.nu, ps_spec.kernel, lambda n, h: 1.5, 3, seed=0)
    with pytest.raises(HypothesisViolated):
        cid_recursion_simulate(cid_nu, cid_kernel, lambda n, h: 0.5, 3, seed=0)


def test_trajectory_file_round_trip(tmp_path, cid_spec):
    traj = simulate(cid_spec, 25, seed=9)
    path = tmp_path / "t.traj"
    write_trajectory(traj, path)
    header, draws = read_trajectory(path)
    assert header["seed"] == 9 and header["n"] == 25 and header["spec_hash"] == cid_spec.hash()
    assert tuple(draws) == traj.labels
    g = general_simulate(UrnSpec(1.0, None, symmetrized_kernel()), 5, seed=1)
    write_trajectory(g, path)
    header, draws = read_trajectory(path)
    assert header["kind"] == "general" and tuple(draws) == g.draws


@given(st.lists(st.integers(0, 3), max_size=8))
def test_predictive_is_a_probability_vector(history):
    K = FiniteKernel.from_rows("1234", [[0.2, 0.3, 0, 0], [0.4, 0.6, 0, 0], [0, 0, 0.2, 0.3], [0, 0, 0.4, 0.6]])
    spec = UrnSpec(1.0, ProbabilityVector(K.space, [0.2, 0.3, 0.2, 0.3]), K)
    p = predictive_after(spec, history).weights
    assert abs(p.sum() - 1) <= 1e-12 and np.all(p >= 0)


@given(st.lists(st.sampled_from(["1", "2"]), max_size=10))
def test_null_part_constancy(history):
    nu = ProbabilityVector(FiniteSpace(("1", "2", "3")), [0.25, 0.25, 0.5])
    from mvps.kernel import Partition, exchangeable_kernel_from_partition

    K = exchangeable_kernel_from_partition(nu, Partition.singletons(nu.space), ["3"])
    p = predictive_after(UrnSpec(1.0, nu, K), history)
    assert p.weights[2] == 0.5
