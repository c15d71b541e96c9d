import json

import numpy as np
import pytest

from conftest import NU1, fraction_law
from mvps.errors import HypothesisViolated, TooLarge
from mvps.exactlaw import (
    JointLaw,
    check_cid,
    check_cid_structure,
    check_exchangeable,
    joint_law,
    project_atoms_law,
    projected_spec,
    ps_joint_law,
    push_law,
    structurally_exchangeable,
)
from mvps.kernel import FiniteKernel, Partition, check_balanced
from mvps.measure import FiniteSpace, ProbabilityVector
from mvps.urn import UrnSpec


def _oracle_check(spec, n):
    exact = fraction_law(spec.theta, spec.nu.weights.tolist(), spec.kernel.matrix.tolist(), n)
    law = joint_law(spec, n)
    for idx, p in exact.items():
        assert abs(float(law.probs[idx]) - float(p)) <= 1e-14


def test_ps_joint_law_table(ps_spec):
    law = joint_law(ps_spec, 2)
    assert law.table == pytest.approx({("0", "0"): 0.375, ("0", "1"): 0.125, ("1", "0"): 0.125, ("1", "1"): 0.375}, abs=1e-15)
    np.testing.assert_allclose(joint_law(ps_spec, 1).probs, ps_spec.nu.weights)
    assert joint_law(ps_spec, 0).probs == 1.0


def test_joint_law_matches_fraction_oracle(cid_spec, null3, block3):
    for spec in (cid_spec, null3[0], block3[0]):
        _oracle_check(spec, 3)


def test_null_part_tuple_probabilities(null3):
    spec, _ = null3
    law = joint_law(spec, 2)
    assert law["1", "3"] == pytest.approx(0.125, abs=1e-15)
    assert law["3", "1"] == pytest.approx(0.125, abs=1e-15)


def test_marginal_consistency(cid_spec):
    law = joint_law(cid_spec, 4)
    for d in (3, 2, 1):
        law = law.marginal()
        np.testing.assert_allclose(law.probs, joint_law(cid_spec, d).probs, atol=1e-15)


def test_too_large():
    space = FiniteSpace.integers(10)
    spec = UrnSpec(1.0, ProbabilityVector.uniform(space), FiniteKernel.identity(space))
    with pytest.raises(TooLarge):
        joint_law(spec, 8)
    with pytest.raises(TooLarge):
        check_cid(spec, 8)


def test_exchangeable_examples(ps_spec, cid_spec, block3):
    assert check_exchangeable(ps_spec, 4).passed
    assert check_exchangeable(block3[0], 4).passed
    rep = check_exchangeable(cid_spec, 3)
    assert not rep.passed
    w = rep.witness
    assert sorted(w["tuple"]) == sorted(w["permuted"]) and w["p_tuple"] != w["p_permuted"]
    law = joint_law(cid_spec, len(w["tuple"]))
    assert law[tuple(w["tuple"])] - law[tuple(w["permuted"])] == pytest.approx(rep.max_residual, abs=1e-15)


def test_cid_examples(ps_spec, cid_spec, cid_kernel, cid_nu):
    assert check_cid(cid_spec, 4).passed
    assert check_cid(cid_spec, 4).max_residual < 1e-12
    assert check_cid(ps_spec, 4).passed
    R = cid_kernel.matrix.copy()
    R[1, 0] = 0.5 * NU1
    rep = check_cid(UrnSpec(1.0, cid_nu, FiniteKernel(cid_kernel.space, R)), 4)
    assert not rep.passed and rep.max_residual > 1e-6
    assert rep.witness["history"] is not None


def test_cid_structure_examples(cid_kernel, cid_nu, block3):
    rep = check_cid_structure(cid_kernel, cid_nu)
    assert rep.passed
    assert rep.details["blocks"] == [["1", "2"], ["3", "4"]]
    rows = [r for r in rep.details["mass_table"] if r["mass"] == pytest.approx(0.5)]
    for r in rows:
        assert r["nu_mass"] == pytest.approx(0.4) and r["nu_mass_given_block"] == pytest.approx(0.4)
    spec, _ = block3
    assert check_cid_structure(spec.kernel, spec.nu).passed

    bad_nu = ProbabilityVector(cid_kernel.space, [0.2, 0.3, 0.3, 0.2])
    rep = check_cid_structure(cid_kernel, bad_nu)
    assert not rep.passed
    mass = rep.details["conditions"]["mass_distribution"]
    assert not mass["passed"]
    w = mass["witness"]
    assert w["block"] == ["1", "2"] and w["mass"] == pytest.approx(0.5)
    assert w["nu_mass"] == pytest.approx(0.5) and w["nu_mass_given_block"] == pytest.approx(0.4)
    # block {3,4} rows are (0.4, 0.6) on a block whose conditional is (0.6, 0.4), so rows fail too
    assert not rep.details["conditions"]["block_rows"]["passed"]


def test_cid_structure_needs_positive_reinforcement(null3):
    spec, _ = null3
    with pytest.raises(HypothesisViolated):
        check_cid_structure(spec.kernel, spec.nu)


def test_ps_tuple_probability():
    nu = ProbabilityVector.uniform(FiniteSpace.integers(2))
    assert ps_joint_law(1.0, nu, ["0", "0"]) == pytest.approx(0.375)
    assert ps_joint_law(1.0, nu, ["0", "1"]) == pytest.approx(0.125)
    nu3 = ProbabilityVector(FiniteSpace(("a", "b", "c")), [0.2, 0.3, 0.5])
    assert ps_joint_law(2.0, nu3, ["b"]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        ps_joint_law(0.0, nu, ["0"])


def test_project_atoms_examples(block3, null3):
    spec, part = block3
    law, rep = project_atoms_law(spec, part, 2)
    assert rep.passed and rep.details["reference"] == "polya_sequence"
    assert law.table == pytest.approx(
        {("B1", "B1"): 0.375, ("B1", "B2"): 0.125, ("B2", "B1"): 0.125, ("B2", "B2"): 0.375}, abs=1e-15
    )
    law, rep = project_atoms_law(spec, Partition.whole(spec.nu.space), 3)
    assert rep.passed and law["B1", "B1", "B1"] == pytest.approx(1.0)

    spec, part = null3
    law, rep = project_atoms_law(spec, part, 3)
    assert rep.passed and rep.details["reference"] == "null_part_mvps"


def test_projected_null_kernel_matches_direct_formula(null3):
    spec, part = null3
    ref = projected_spec(spec, part)
    # R_pi rows for live blocks: nu(Z^c) delta_p + nu(Z) nu_pi(.|pi(Z)); the Z block row is 0
    np.testing.assert_allclose(ref.kernel.matrix, [[0.5, 0, 0.5], [0, 0.5, 0.5], [0, 0, 0]])
    # the exact pushed law also matches a fraction oracle on the block labels
    exact = fraction_law(ref.theta, ref.nu.weights.tolist(), ref.kernel.matrix.tolist(), 3)
    pushed = push_law(joint_law(spec, 3), part)
    for idx, p in exact.items():
        assert abs(pushed.probs[idx] - float(p)) <= 1e-14


def test_projection_raises_for_straddling_block(null3):
    spec, _ = null3
    part = Partition.from_labels(spec.nu.space, [["1"], ["2", "3"]])
    with pytest.raises(HypothesisViolated):
        project_atoms_law(spec, part, 2)


def test_joint_law_serialization(tmp_path, cid_spec):
    law = joint_law(cid_spec, 2)
    back = JointLaw.from_dict(json.loads(law.to_json()))
    np.testing.assert_array_equal(back.probs, law.probs)
    text = law.to_csv(tmp_path / "law.csv")
    lines = text.strip().split("\n")
    assert lines[0] == "x1,x2,probability" and len(lines) == 17
    assert (tmp_path / "law.csv").read_text() == text


def test_structural_exchangeability(block3, cid_spec):
    spec, _ = block3
    assert structurally_exchangeable(spec.kernel, spec.nu)
    assert not structurally_exchangeable(cid_spec.kernel, cid_spec.nu)
    assert not check_balanced(cid_spec.kernel, cid_spec.nu).passed
