"""Restarted Lanczos for Stieltjes functions.

After a cycle of length ``m`` the error ``f(A)b - f_m`` equals
``e(A) v_{m+1}`` with

    e(z) = s ||b|| gamma  int 1/w(t) * 1/(z + t) dmu(t),
    w(t) = prod_i (t + theta_i),  gamma = prod_i beta_{i+1},

where the ``theta_i`` are the Ritz values of every cycle so far and
``s = (-1)**M`` for ``M`` accumulated Ritz values (with positive
subdiagonal entries ``beta``). The error function is again a multiple of a
Stieltjes function, so each new cycle approximates ``e(A) v`` with the
same machinery. The integral is evaluated by adaptive quadrature over the
measure, with ``1/w`` and ``gamma`` carried in log form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._factors import alpha_m, shifted_kappa
from .lanczos import lanczos_error_bound, lanczos_extend, lanczos_start, tridiagonal_eigh
from .operators import LinearOperator, SpectralBounds
from .report import ConvergenceError, MethodReport, QuadratureError, SpectrumError
from .stieltjes import MAX_NODES, StieltjesFunction


@dataclass
class RestartState:
    """Data carried from one restart cycle to the next.

    Attributes
    ----------
    cycle : int
        Number of completed cycles.
    m_re : int
        Restart length.
    approximation : ndarray
        Current iterate ``f^{(k)}``.
    thetas : list of ndarray
        Ritz values of every completed cycle.
    log_scale : float
        ``log(||b|| * gamma)`` accumulated over all cycles.
    sign : float
        ``(-1)**M`` for ``M`` accumulated Ritz values.
    v : ndarray
        Starting vector of the next cycle.
    quad_nodes : int
        Gauss-Legendre node count that sufficed last time (reused as the
        starting point of the next adaptive evaluation).
    """

    m_re: int
    approximation: np.ndarray
    v: np.ndarray
    norm_b: float
    cycle: int = 0
    thetas: list[np.ndarray] = field(default_factory=list)
    log_scale: float = 0.0
    sign: float = 1.0
    quad_nodes: int = 16

    @classmethod
    def initial(cls, b, m_re: int) -> "RestartState":
        b = np.asarray(b)
        nb = float(np.linalg.norm(b))
        if nb == 0.0:
            raise ValueError("starting vector must be nonzero")
        return cls(m_re=m_re, approximation=np.zeros_like(b, dtype=np.result_type(b, float)),
                   v=b / nb, norm_b=nb, log_scale=float(np.log(nb)))

    @property
    def all_thetas(self) -> np.ndarray:
        return np.concatenate(self.thetas) if self.thetas else np.zeros(0)


def _error_values(state: RestartState, f: StieltjesFunction, theta: np.ndarray, tol: float) -> np.ndarray:
    """``e(theta_j)`` for the new Ritz values, adaptive in the node count."""
    old = state.all_thetas
    if old.size and old.min() <= 0:
        raise SpectrumError("accumulated Ritz values must be positive")

    def values(n):
        t, w = f.quadrature_rule(n)
        logw = state.log_scale - np.sum(np.log(t[:, None] + old[None, :]), axis=1)
        return state.sign * ((w * np.exp(logw)) @ (1.0 / (t[:, None] + theta[None, :])))

    if f.is_discrete:
        return values(0)
    n = max(16, state.quad_nodes // 2)
    prev = values(n)
    while True:
        n *= 2
        if n > MAX_NODES:
            raise QuadratureError(f"error function quadrature did not reach {tol:g}")
        cur = values(n)
        if np.max(np.abs(cur - prev)) <= tol * np.max(np.abs(cur)):
            state.quad_nodes = n
            return cur
        prev = cur


def error_function_apply(state: RestartState, f: StieltjesFunction, alpha, beta, tol: float = 1e-12) -> np.ndarray:
    """``e(T) e_1`` in the coordinates of the new cycle's basis, and the Ritz values.

    ``T`` is the tridiagonal matrix with diagonal ``alpha`` and off-diagonal
    ``beta``. The function is evaluated through the eigendecomposition
    ``T = S diag(theta) S^T``, so each quadrature node costs one pass over
    the Ritz values rather than a separate tridiagonal solve.
    With no accumulated cycles this is ``||b|| f(T) e_1``.

    Returns
    -------
    coeffs : ndarray
        ``e(T) e_1``.
    theta : ndarray
        Eigenvalues of ``T`` (needed for the next cycle's error function).
    """
    theta, S = tridiagonal_eigh(alpha, beta)
    if theta[0] <= 0:
        raise SpectrumError(f"nonpositive Ritz value {theta[0]:g}")
    F = _error_values(state, f, theta, tol)
    return S @ (S[0, :] * F), theta


def restarted_lanczos_fAb(
    op: LinearOperator,
    f: StieltjesFunction,
    b,
    m_re: int,
    tol: float,
    max_cycles: int = 100,
    stopping: str = "update",
    reference=None,
    bounds: SpectralBounds | None = None,
    quad_tol: float | None = None,
):
    """Restarted Lanczos approximation of ``f(A) b``.

    Parameters
    ----------
    m_re : int
        Restart length; each cycle costs exactly ``m_re`` matvecs.
    tol : float
        Relative tolerance.
    max_cycles : int
        Cycle cap.
    stopping : {"update", "oracle"}
        ``"update"`` stops when the norm of the last additive update is
        below ``tol ||f^{(k)}||`` or when the restarted bound (needs
        ``bounds``) is; ``"oracle"`` uses the true error against
        ``reference``.
    quad_tol : float, optional
        Relative tolerance of the error-function quadrature; default
        ``tol / (10 max_cycles)``.

    Returns
    -------
    x : ndarray
    report : MethodReport
        ``extra["update_norms"]`` lists the update norm of each cycle.
    """
    if m_re < 1:
        raise ValueError("restart length must be at least 1")
    if stopping not in ("update", "oracle"):
        raise ValueError(f"unknown stopping rule {stopping!r}")
    if stopping == "oracle" and reference is None:
        raise ValueError("oracle stopping needs a reference solution")
    qtol = tol / (10 * max_cycles) if quad_tol is None else quad_tol
    ref = None if reference is None else np.asarray(reference)
    ref_norm = None if ref is None else float(np.linalg.norm(ref))
    count0 = op.matvec_count
    report = MethodReport(method="restarted")
    updates: list[float] = []
    errors: list[float] = []

    state = RestartState.initial(b, m_re)
    bound_C = None
    if bounds is not None:
        # A-norm bound converted to the 2-norm
        bound_C = lanczos_error_bound(bounds, f, 0, state.norm_b) / np.sqrt(bounds.lambda_min)
        bound_rate = alpha_m(m_re, shifted_kappa(bounds.lambda_min, bounds.lambda_max, f.t0))
    est = np.inf
    invariant = False
    while state.cycle < max_cycles:
        dec = lanczos_extend(op, lanczos_start(state.v, keep_basis=True), m_re)
        a, bt = dec.tridiagonal()
        y, theta = error_function_apply(state, f, a, bt, qtol)
        V = dec.basis
        update = V @ y
        state.approximation = state.approximation + update
        state.cycle += 1
        invariant = dec.invariant
        nu = float(np.linalg.norm(update))
        nx = float(np.linalg.norm(state.approximation))
        updates.append(nu)
        if ref is not None:
            errors.append(float(np.linalg.norm(state.approximation - ref)) / ref_norm)
            report.relative_error = errors[-1]
        if stopping == "oracle":
            est = errors[-1]
        else:
            est = nu / nx
            if bound_C is not None:
                est = min(est, bound_C * bound_rate**state.cycle / nx)
        report.history.append(est)
        if est <= tol or invariant:
            break
        # bookkeeping for the next error function
        state.thetas.append(theta)
        state.log_scale += dec.log_gamma
        state.sign *= (-1.0) ** dec.m
        state.v = dec.v_next
    report.iterations = state.cycle * m_re
    report.matvecs = op.matvec_count - count0
    report.error_estimate = est
    report.extra.update(cycles=state.cycle, restart_length=m_re, update_norms=updates,
                        cycle_errors=errors, quad_nodes=state.quad_nodes)
    if not (est <= tol or invariant):
        raise ConvergenceError(f"restarted Lanczos did not converge in {max_cycles} cycles",
                               state.approximation, report)
    report.converged = True
    return state.approximation, report
