"""Run records and exception types shared by all solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class KrylovError(Exception):
    """Base class for errors raised by this package."""


class SpectrumError(KrylovError):
    """A quantity that must be positive (Ritz value, curvature, ...) is not."""


class QuadratureError(KrylovError):
    """Adaptive quadrature did not reach its tolerance within the node cap."""


class ConvergenceError(KrylovError):
    """An iteration hit its limit before the stopping rule fired.

    The partial result and the run report are attached so callers can
    inspect the best available approximation.
    """

    def __init__(self, message: str, result=None, report: "MethodReport | None" = None):
        super().__init__(message)
        self.result = result
        self.report = report


@dataclass
class MethodReport:
    """Summary of a single solver run.

    Attributes
    ----------
    method : str
        Short method tag (``two_pass``, ``mscg``, ``restarted``, ``si``, ``eksm``).
    converged : bool
        Whether the stopping rule fired before the iteration limit.
    iterations : int
        Outer iterations (Lanczos steps, CG steps, restart cycles times length, ...).
    matvecs : int
        Total products with ``A``, including those spent in inner solves.
    inner_matvecs : int
        Portion of ``matvecs`` spent inside inner CG solves.
    error_estimate : float or None
        Final value of the quantity the stopping rule compared with ``tol``.
    relative_error : float or None
        True relative error, only filled when a reference solution was supplied.
    history : list of float
        Per-iteration (or per-cycle) values of the stopping quantity.
    extra : dict
        Method-specific data such as pole counts or inner tolerances.
    """

    method: str
    converged: bool = False
    iterations: int = 0
    matvecs: int = 0
    inner_matvecs: int = 0
    error_estimate: float | None = None
    relative_error: float | None = None
    history: list[float] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)
