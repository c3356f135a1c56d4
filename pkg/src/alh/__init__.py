"""Ablowitz-Ladik lattice hierarchy: operators, scattering, functionals and flows."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AlhError,
    BlowUp,
    BranchViolation,
    NoAnalyticRule,
    OrderingMismatch,
    SingularState,
    SingularTransfer,
    UnknownOperator,
    ZeroOfA,
)
from .lattice import Field, LatticeState, Window  # noqa: F401
