"""Exception and warning types raised across the package."""


class AlhError(Exception):
    """Base class for all package errors."""


class SingularState(AlhError, ValueError):
    """Some weight 1 - q_k r_k is too close to zero."""


class SingularTransfer(AlhError, ValueError):
    """A transfer matrix is not invertible, so the backward recursion fails."""


class ZeroOfA(AlhError, ValueError):
    """a(z) (or its hatted partner) vanishes at the requested spectral point."""


class BranchViolation(AlhError, ValueError):
    """|r_k q_k| >= 1 somewhere, so the principal log branch is not usable."""


class UnknownOperator(AlhError, KeyError):
    pass


class OrderingMismatch(AlhError, ValueError):
    """Field ordering tag does not match what an operator expects."""


class BlowUp(AlhError, FloatingPointError):
    """Time integration left the bounded region."""


class NoAnalyticRule(UserWarning):
    """Emitted when a variational derivative falls back to finite differences."""
