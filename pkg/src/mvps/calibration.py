"""Statistical thresholds and replicate counts, kept in one place."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Calibration:
    # standardized-residual bound for per-cell / per-test-set comparisons
    z_max: float = 4.0
    # bound for comparisons of a single Monte Carlo mean with its target
    z_mean: float = 3.0
    mean_replicates: int = 100_000
    law_replicates: int = 1_000_000
    # default stick-breaking truncation target E[residual] <= eps
    truncation_eps: float = 1e-8
    # rows per vectorized sampling chunk
    chunk: int = 100_000


CALIBRATION = Calibration()
