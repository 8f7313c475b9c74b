"""Configured limits shared across modules."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Limits:
    max_grid_side: int = 4096
    # largest d for which the C(d, d/2) half-subsets are enumerated
    max_subset_enum_d: int = 16
    # largest d**(2n) for which all sample sequences are enumerated
    max_sequence_enum: int = 10**7
    max_exhaustive_cut_d: int = 24
    # construction tolerances for GridDistribution
    sum_tol: float = 1e-9
    neg_tol: float = 1e-12
    # residual drift below this is left alone so that re-normalisation is idempotent
    renorm_floor: float = 1e-14


LIMITS = Limits()
