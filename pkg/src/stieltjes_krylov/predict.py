"""A-priori iteration counts, matvec predictions and a work-unit cost model.

Every non-restarted method is modelled as ``||f(A)b - f_m|| <= C alpha^m``
with ``C = sqrt(1 - alpha^2) ||f(A)b||``, giving
``m* = ceil(log_alpha(eps / C))``. Restarts use the cosh form of the
Lanczos factor, and the rational methods add up predicted inner CG counts
over the relaxed tolerance schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._factors import alpha_m, cg_factor, shifted_kappa
from .mscg import rational_approximation
from .operators import SpectralBounds
from .rational import inner_tolerance_schedule, optimal_shift
from .stieltjes import StieltjesFunction

METHODS = ("two_pass", "mscg", "restarted", "eksm", "si")


@dataclass
class Prediction:
    """A-priori cost estimate for one method.

    ``m_star`` counts outer iterations (cycles times length for restarts),
    ``inner_iterations`` lists the predicted CG counts of the rational
    methods and ``total_matvecs`` is the headline figure.
    """

    method: str
    alpha: float
    C: float
    m_star: int
    total_matvecs: int
    inner_iterations: list[int] = field(default_factory=list)
    cycles: int | None = None
    work_units: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m_star < 0 or self.total_matvecs < self.m_star:
            raise ValueError("inconsistent prediction")


def convergence_factor(kind: str, bounds: SpectralBounds, t: float = 0.0) -> float:
    """Asymptotic convergence factor.

    ``"lanczos"``: ``c(t)`` for ``kappa(t) = (lmax + t)/(lmin + t)``.
    ``"si_or_ek"``: ``(kappa^{1/4} - 1)/(kappa^{1/4} + 1)``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if kind == "lanczos":
        return cg_factor(shifted_kappa(bounds.lambda_min, bounds.lambda_max, t))
    if kind == "si_or_ek":
        return cg_factor(np.sqrt(bounds.kappa))
    raise ValueError(f"unknown kind {kind!r}")


def kappa_xi(t: float, xi: float, bounds: SpectralBounds) -> float:
    """Condition number of ``I + (xi + t) B`` with ``B = (A - xi I)^{-1}``."""
    if t < 0 or not xi < 0:
        raise ValueError("need t >= 0 and xi < 0")
    lo, hi = bounds.lambda_min, bounds.lambda_max
    if t <= -xi:
        return (hi + t) / (lo + t) * (lo - xi) / (hi - xi)
    return (lo + t) / (hi + t) * (hi - xi) / (lo - xi)


def kappa_xi_limit(xi: float, bounds: SpectralBounds) -> float:
    """``lim_{t -> inf} kappa_xi(t) = (lmax - xi)/(lmin - xi)``."""
    return (bounds.lambda_max - xi) / (bounds.lambda_min - xi)


def estimate_C(norm_fAb: float, alpha: float) -> float:
    """``sqrt(1 - alpha^2) ||f(A)b||`` from a geometric coefficient model."""
    if not (0 <= alpha < 1):
        raise ValueError("alpha must lie in [0, 1)")
    return math.sqrt(1.0 - alpha * alpha) * norm_fAb


def predict_m_star(alpha: float, C: float, eps: float) -> int:
    """``ceil(log_alpha(eps / C))``; zero when ``eps >= C``."""
    if eps >= C:
        return 0
    if alpha <= 0:
        return 1
    if not alpha < 1:
        raise ValueError("alpha must be below 1")
    x = math.log(eps / C) / math.log(alpha)
    # guard against ceil(10.000000000000002) for exact powers
    return int(math.ceil(x - 1e-9))


def _log_cosh(x: float) -> float:
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def predict_restart_cycles(m_re: int, m_star: int, c: float) -> int:
    """``k* = ceil(ln cosh(m* ln c) / ln cosh(m_re ln c))``, at least 1."""
    if m_re < 1:
        raise ValueError("m_re must be at least 1")
    if m_re >= m_star or c <= 0 or c >= 1:
        return 1
    lc = math.log(c)
    k = _log_cosh(m_star * lc) / _log_cosh(m_re * lc)
    return max(1, int(math.ceil(k - 1e-12)))


def predict_inner_iterations(alpha_in: float, tol: float) -> int:
    """CG steps for a unit right-hand side to reach residual ``tol``."""
    if alpha_in <= 0:
        return 1
    return predict_m_star(alpha_in, math.sqrt(1.0 - alpha_in**2), tol)


def mscg_deactivation(bounds: SpectralBounds, poles, tols, norm_b: float, m_seed: int) -> list[int]:
    """Predicted last active iteration per shifted system.

    System ``i`` is dropped once ``sqrt(kappa_i) alpha_m(kappa_i) ||b||``,
    the CG residual bound for ``(A - zeta_i I)``, meets ``tols[i]``.
    """
    out = []
    for z, tl in zip(poles, tols):
        k = shifted_kappa(bounds.lambda_min, bounds.lambda_max, -z)
        m = 0
        while m < m_seed and math.sqrt(k) * alpha_m(m, k) * norm_b > tl:
            m += 1
        out.append(m)
    return out


def predict_total_matvecs(
    method: str,
    bounds: SpectralBounds,
    f: StieltjesFunction,
    norm_fAb: float,
    eps: float,
    params: dict | None = None,
) -> Prediction:
    """Predicted matvecs for ``method`` at relative accuracy ``eps``.

    Parameters
    ----------
    method : {"two_pass", "mscg", "restarted", "eksm", "si"}
    norm_fAb : float
        ``||f(A)b||`` (exact or estimated).
    eps : float
        Relative accuracy; the absolute target is ``eps ||f(A)b||``.
    params : dict, optional
        ``m_re`` (restart length, default 30), ``p`` (pole count for MSCG,
        default the smallest sufficient one), ``norm_b`` (default 1).
    """
    params = dict(params or {})
    norm_b = float(params.get("norm_b", 1.0))
    eps_abs = eps * norm_fAb
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")

    if method in ("two_pass", "restarted"):
        a = convergence_factor("lanczos", bounds, f.t0)
        C = estimate_C(norm_fAb, a)
        m = predict_m_star(a, C, eps_abs)
        if method == "two_pass":
            return Prediction(method, a, C, m, 2 * m)
        m_re = int(params.get("m_re", 30))
        k = predict_restart_cycles(m_re, m, a)
        return Prediction(method, a, C, k * m_re, k * m_re, cycles=k,
                          extra={"m_re": m_re, "lanczos_m_star": m})

    if method == "mscg":
        r = rational_approximation(f, bounds, eps_abs / (2.0 * norm_b), p=params.get("p"))
        z1 = float(r.poles[0])
        a = cg_factor(shifted_kappa(bounds.lambda_min, bounds.lambda_max, -z1))
        C = estimate_C(norm_fAb, a)
        m = max(predict_m_star(a, C, eps_abs), 1)
        tols = eps_abs * (bounds.lambda_min - r.poles) / (2.0 * r.p * np.abs(r.weights))
        last = mscg_deactivation(bounds, r.poles, tols, norm_b, m)
        last[0] = m
        active = [int(sum(1 for L in last if L > j)) for j in range(m)]
        return Prediction(method, a, C, m, m,
                          extra={"p": r.p, "zeta_1": z1, "active": active, "deactivation": last})

    # rational methods
    xi = optimal_shift(bounds)
    a0 = convergence_factor("si_or_ek", bounds)
    if method == "si":
        rate, kin, ratio = a0, math.sqrt(bounds.kappa), None
    else:
        rate, kin, ratio = a0**2, bounds.kappa, (1.0 / a0**2 if a0 > 0 else 1.0)
    C = estimate_C(norm_fAb, rate)
    m = max(predict_m_star(rate, C, eps_abs), 1)
    sched = inner_tolerance_schedule(eps * norm_b, f, bounds, xi, ratio=ratio)
    a_in = cg_factor(kin)
    inner = [predict_inner_iterations(a_in, sched.tolerance(j)) for j in range(1, m + 1)]
    outer = m if method == "eksm" else 0
    return Prediction(method, rate, C, m, int(sum(inner)) + outer, inner_iterations=inner,
                      extra={"eps1": sched.eps1, "ratio": sched.ratio, "inner_factor": a_in})


def work_units(method: str, counts: dict, M_cost: float, params: dict | None = None) -> float:
    """Cost in vector-operation units ``V`` with a matvec costing ``M_cost``.

    ``mscg``: ``counts["active"]`` lists the live systems per iteration
    (seed included); each iteration costs ``M + 12`` plus 5 per extra live
    system, and forming the weighted sum costs ``p - 1``.
    ``restarted``: ``counts["iterations"]`` Lanczos steps at ``M + 9``
    each plus ``2 m_re`` per cycle for forming the update.
    """
    if M_cost <= 0:
        raise ValueError("M_cost must be positive")
    if method == "mscg":
        active = list(counts.get("active", []))
        if not active:
            return 0.0
        p = int(counts.get("p", max(active)))
        return float(sum(M_cost + 12 + 5 * (a - 1) for a in active) + (p - 1))
    if method == "restarted":
        it = int(counts.get("iterations", 0))
        if it == 0:
            return 0.0
        m_re = int(counts["m_re"])
        cycles = int(counts.get("cycles", math.ceil(it / m_re)))
        return float(it * (M_cost + 9) + 2 * m_re * cycles)
    raise ValueError(f"no work model for {method!r}")


def perturbed_rate(eps_perturb: float, bounds: SpectralBounds, return_flag: bool = False):
    """Convergence rate of inexact SI Lanczos for ``||E_m|| = eps_perturb``.

    ``alpha(0) + (-2 xi eps + 2 sqrt(eps) sqrt(-beta xi + eps xi^2)) / (1 + sqrt(1 - beta^2))``
    with ``beta = (sqrt(kappa) - 1)/(sqrt(kappa) + 1)`` and the optimal
    shift. The value is capped at 1, which it reaches at
    ``eps = 1/(lambda_max - xi)``; beyond that no convergence is implied.

    With ``return_flag=True`` returns ``(rate, saturated)``.
    """
    if eps_perturb < 0:
        raise ValueError("eps_perturb must be nonnegative")
    xi = optimal_shift(bounds)
    beta = cg_factor(bounds.kappa)
    a0 = convergence_factor("si_or_ek", bounds)
    e = float(eps_perturb)
    threshold = 1.0 / (bounds.lambda_max - xi)
    num = -2.0 * xi * e + 2.0 * math.sqrt(e) * math.sqrt(-beta * xi + e * xi * xi)
    rate = a0 + num / (1.0 + math.sqrt(1.0 - beta * beta))
    saturated = e >= threshold or rate >= 1.0
    rate = 1.0 if saturated else rate
    return (rate, saturated) if return_flag else rate
