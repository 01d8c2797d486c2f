"""Exception hierarchy shared by the library and the command layer."""

from __future__ import annotations

from typing import Optional

import numpy as np


class MFGError(Exception):
    """Base class for all mfg_exit errors."""


class DomainError(MFGError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(MFGError, ValueError):
    """Invalid grid, boundary partition, expression or run configuration."""


class EvaluationError(MFGError, ArithmeticError):
    """Non-finite field or objective value."""


class SolverError(MFGError, RuntimeError):
    """Optimizer failure; keeps the iterate that triggered it."""

    def __init__(self, message: str, iterate: Optional[np.ndarray] = None, step: Optional[float] = None):
        super().__init__(message)
        self.iterate = None if iterate is None else np.array(iterate, copy=True)
        self.step = step
