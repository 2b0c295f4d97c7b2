"""Exception types shared across the package.

Contract violations (invalid inputs, unstable dynamics, unphysical states)
are distinguished from numerical failures (quadrature or optimizer
non-convergence) because the command line front end maps them to different
exit codes (2 and 3, respectively).
"""


class ContractViolationError(ValueError):
    """An operation was called outside its documented preconditions."""


class UnstableSystemError(ContractViolationError):
    """The drift matrix has an eigenvalue with non-negative real part."""


class UnphysicalCovarianceError(ContractViolationError):
    """A covariance matrix violates the uncertainty relation beyond tolerance."""


class StepSizeError(ContractViolationError):
    """Integration step too coarse for the fastest system rate."""


class InsufficientRecordError(ContractViolationError):
    """An output record is too short to contain the requested pulse windows."""


class InsufficientSamplesError(ContractViolationError):
    """Too few trajectories for the requested statistical estimate."""


class QuadratureConvergenceError(RuntimeError):
    """A frequency integral did not reach the requested tolerance."""


class BracketError(RuntimeError):
    """No bracketing triple found for a 1-D minimization."""


CONTRACT_EXIT_CODE = 2
NUMERICAL_EXIT_CODE = 3
