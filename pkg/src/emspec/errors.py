"""Exception hierarchy shared by every stage.

The CLI maps these onto exit codes: :class:`InputError` -> 2,
:class:`NumericalError` -> 3.
"""

from __future__ import annotations


class EmspecError(Exception):
    """Base class for all package errors."""


class InputError(EmspecError):
    """Unreadable, malformed or inconsistent input data."""


class PrerequisiteError(InputError):
    """A stage was run before the stage that produces its inputs."""


class DegenerateEpochError(InputError):
    """An instrument has zero variance inside an epoch."""

    def __init__(self, message: str, instruments=(), end_date=None):
        super().__init__(message)
        self.instruments = list(instruments)
        self.end_date = end_date


class NumericalError(EmspecError):
    """A numerical routine failed (non-convergence, rank deficiency)."""


class ConvergenceError(NumericalError):
    pass


class RankDeficientError(NumericalError):
    def __init__(self, message: str, columns=()):
        super().__init__(message)
        self.columns = list(columns)
