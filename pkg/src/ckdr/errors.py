"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericError (and subclasses) -> 3, VerificationError -> 4.
"""


class CkdrError(Exception):
    """Base class for all package errors."""


class ConfigError(CkdrError):
    """Invalid configuration: unknown keys, bad parameter values, unusable combinations."""


class DataError(CkdrError):
    """Malformed input data: bad labels, ragged rows, dimension mismatches."""


class NumericError(CkdrError):
    """Numerical failure: non-finite values, non-convergence, lost positive semi-definiteness."""


class DegenerateKernelError(NumericError):
    """Kernel with an all-zero diagonal on the given sample cannot be normalized."""


class InfeasibleError(NumericError):
    """The requested feasible set is empty."""


class VerificationError(CkdrError):
    """A verification-suite check failed."""
