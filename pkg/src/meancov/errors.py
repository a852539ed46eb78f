"""Exception types raised by meancov.

Every error carries a short machine-readable ``code`` so the CLI can map
failures to exit statuses without string matching.
"""


class MeanCovError(ValueError):
    code = "ERROR"


class DimensionError(MeanCovError):
    code = "DIM"


class NonPositiveDefiniteError(MeanCovError):
    code = "NON_PD"


class NotSymmetricError(MeanCovError):
    code = "NOT_SYMMETRIC"


class RankMismatchError(MeanCovError):
    code = "RANK_MISMATCH"


class RangeMismatchError(MeanCovError):
    code = "RANGE_MISMATCH"


class NonFiniteError(MeanCovError):
    code = "NON_FINITE"


class SingularScatterError(MeanCovError):
    code = "SINGULAR_SCATTER"


class TooFewRowsError(SingularScatterError):
    # With n < p + 1 the scatter matrix cannot be p.d., so this is a special
    # case of a singular scatter.
    code = "TOO_FEW_ROWS"


class SingularGroupError(MeanCovError):
    code = "SINGULAR_G"


class OutOfRangeError(MeanCovError):
    code = "OUT_OF_RANGE"


class ConfigError(MeanCovError):
    code = "CONFIG"
