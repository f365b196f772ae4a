"""CG-type convergence factors shared by the bound and prediction code."""

from __future__ import annotations

import numpy as np


def cg_factor(kappa: float) -> float:
    """``(sqrt(kappa) - 1) / (sqrt(kappa) + 1)``; zero for ``kappa == 1``."""
    if kappa < 1:
        raise ValueError("condition number below 1")
    if kappa == 1:
        return 0.0
    s = np.sqrt(kappa)
    return float((s - 1.0) / (s + 1.0))


def alpha_m(m: int, kappa: float) -> float:
    """``1 / cosh(m ln c)`` with ``c = cg_factor(kappa)``; zero if ``kappa == 1``."""
    c = cg_factor(kappa)
    if c == 0.0:
        return 0.0 if m > 0 else 1.0
    x = m * np.log(c)
    # 1/cosh overflows gracefully to 0 in this form
    return float(2.0 * np.exp(x) / (1.0 + np.exp(2.0 * x)))


def shifted_kappa(lmin: float, lmax: float, t: float) -> float:
    """Condition number of ``A + tI``."""
    return (lmax + t) / (lmin + t)
