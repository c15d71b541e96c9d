"""Measure-valued Polya sequences: exact checks, structure, and samplers."""

from .errors import MVPSError
from .exactlaw import (
    check_cid,
    check_cid_structure,
    check_exchangeable,
    joint_law,
    project_atoms_law,
    ps_joint_law,
)
from .kernel import (
    FiniteKernel,
    Partition,
    atoms_of_kernel,
    check_balanced,
    check_proper,
    check_scaled_stationarity,
    check_self_averaging,
    decompose_blocks,
    exchangeable_kernel_from_partition,
)
from .measure import FiniteMeasure, FiniteSpace, ProbabilityVector, tv_distance
from .urn import UrnSpec, predictive, predictive_after, simulate

__version__ = "0.1.0"

__all__ = [
    "MVPSError",
    "check_cid",
    "check_cid_structure",
    "check_exchangeable",
    "joint_law",
    "project_atoms_law",
    "ps_joint_law",
    "FiniteKernel",
    "Partition",
    "atoms_of_kernel",
    "check_balanced",
    "check_proper",
    "check_scaled_stationarity",
    "check_self_averaging",
    "decompose_blocks",
    "exchangeable_kernel_from_partition",
    "FiniteMeasure",
    "FiniteSpace",
    "ProbabilityVector",
    "tv_distance",
    "UrnSpec",
    "predictive",
    "predictive_after",
    "simulate",
]
