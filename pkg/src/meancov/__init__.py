"""Invariant tests of a multivariate normal mean against a restricted alternative."""

from .errors import MeanCovError
from .invariant_tests import (
    SufficientStats,
    TestStatistics,
    compute_statistics,
    invariant_params,
    sufficient_stats,
)
from .matrix_core import PartitionedSpdMatrix, b_mp, b_plus, pseudo_inverse, schur_complement

__version__ = "0.1.0"

__all__ = [
    "MeanCovError",
    "PartitionedSpdMatrix",
    "SufficientStats",
    "TestStatistics",
    "__version__",
    "b_mp",
    "b_plus",
    "compute_statistics",
    "invariant_params",
    "pseudo_inverse",
    "schur_complement",
    "sufficient_stats",
]
