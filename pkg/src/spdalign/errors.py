"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError (incl. ConvergenceError) -> 4. Plain ValueError from input
validation is treated as a data error at the CLI boundary.
"""

from __future__ import annotations

import numpy as np


class ConfigError(Exception):
    """Invalid experiment configuration (schema violation, bad field value)."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DataError(Exception):
    """Malformed or inconsistent input data (files, trials, montages)."""


class NumericalError(Exception):
    """Numerical failure: eigendecomposition breakdown, singular systems."""


class ConvergenceError(NumericalError):
    """Iterative solver did not reach tolerance within its iteration budget.

    Carries the last iterate and the residual at the point of failure so
    callers can inspect or restart.
    """

    def __init__(self, message: str, last_iterate: np.ndarray | None = None,
                 residual: float | None = None):
        self.last_iterate = last_iterate
        self.residual = residual
        super().__init__(message)
