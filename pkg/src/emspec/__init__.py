"""Emerging-spectrum indicators of market instabilities.

Rolling-epoch correlation matrices are distorted by a small power map so
that their degenerate zero eigenvalues split into an "emerging spectrum".
The smallest emerging eigenvalue, the mean market correlation and the
largest eigenvalue form an indicator series that is then examined with a
Silverman mode test, a lagged regression and GARCH(1,1) volatility fits.
"""

from emspec.errors import (
    ConvergenceError,
    DegenerateEpochError,
    EmspecError,
    InputError,
    NumericalError,
    PrerequisiteError,
    RankDeficientError,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DegenerateEpochError",
    "EmspecError",
    "InputError",
    "NumericalError",
    "PrerequisiteError",
    "RankDeficientError",
    "__version__",
]
