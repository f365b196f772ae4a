"""Hermitian Lanczos process, the Lanczos approximation of f(A)b and its
two-pass, basis-free variant.

With ``A V_m = V_m T_m + beta_{m+1} v_{m+1} e_m^T`` the approximation is
``f_m = ||b|| V_m f(T_m) e_1``. The two-pass method runs the three-term
recurrence once to obtain ``T_m`` without storing ``V_m`` and a second time
to accumulate ``V_m y_m``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._factors import alpha_m, cg_factor, shifted_kappa
from .operators import LinearOperator, SpectralBounds
from .report import ConvergenceError, MethodReport, SpectrumError
from .stieltjes import StieltjesFunction

_BREAKDOWN_RTOL = 1e-13
_Q_MAX = 0.99


@dataclass
class LanczosDecomposition:
    """State of a Lanczos run of order ``m``.

    ``alpha`` holds the diagonal of ``T_m`` and ``beta`` the values
    ``beta_2, ..., beta_{m+1}``; the last one couples to ``v_next``.
    ``basis`` holds ``v_1, ..., v_m`` column-wise when the basis is kept.
    """

    norm_b: float
    v_next: np.ndarray
    v_prev: np.ndarray | None = None
    alpha: list[float] = field(default_factory=list)
    beta: list[float] = field(default_factory=list)
    keep_basis: bool = True
    invariant: bool = False
    _V: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.alpha)

    @property
    def basis(self) -> np.ndarray | None:
        if not self.keep_basis:
            return None
        if self._V is None:
            return np.zeros((self.v_next.size, 0), dtype=self.v_next.dtype)
        return self._V[:, : self.m]

    def _reserve(self, extra: int) -> None:
        need = self.m + extra
        if self._V is not None and self._V.shape[1] >= need:
            return
        V = np.empty((self.v_next.size, need), dtype=self.v_next.dtype)
        if self._V is not None:
            V[:, : self.m] = self._V[:, : self.m]
        self._V = V

    @property
    def log_gamma(self) -> float:
        """``log(prod beta_{i+1})``; the product itself is positive."""
        return float(np.sum(np.log(self.beta))) if self.beta else 0.0

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and off-diagonal of ``T_m``."""
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta[: max(self.m - 1, 0)], dtype=float)
        return a, b

    def orthogonality_loss(self) -> float:
        """``max |V^H V - I|`` for a stored basis."""
        V = self.basis
        if V is None:
            raise ValueError("basis was not kept")
        G = V.conj().T @ V
        return float(np.max(np.abs(G - np.eye(G.shape[0])))) if G.size else 0.0

    def residual_norm(self, op_matrix) -> float:
        """``||A V - V T - beta v_{m+1} e_m^T||`` for a dense ``A`` (testing aid)."""
        V = self.basis
        a, b = self.tridiagonal()
        T = np.diag(a) + np.diag(b, 1) + np.diag(b, -1)
        R = op_matrix @ V - V @ T
        R[:, -1] -= self.beta[-1] * self.v_next
        return float(np.linalg.norm(R, 2))


def lanczos_start(b, keep_basis: bool = True) -> LanczosDecomposition:
    """Empty decomposition seeded with ``b / ||b||``."""
    b = np.asarray(b)
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        raise ValueError("starting vector must be nonzero")
    return LanczosDecomposition(norm_b=nb, v_next=b / nb, keep_basis=keep_basis)


def lanczos_extend(
    op: LinearOperator,
    dec: LanczosDecomposition,
    steps: int,
    keep_basis: bool | None = None,
) -> LanczosDecomposition:
    """Run ``steps`` further Lanczos steps in place and return ``dec``.

    With a kept basis every new vector is reorthogonalised twice against
    all previous ones; without it only the last two vectors are retained
    and the plain three-term recurrence is used. A (numerically) zero
    ``beta`` marks the decomposition as invariant and stops early.
    """
    if keep_basis is not None and keep_basis != dec.keep_basis:
        if keep_basis and dec.m > 0:
            raise ValueError("cannot start keeping the basis mid-run")
        dec.keep_basis = keep_basis
    if dec.keep_basis:
        dec._reserve(steps)
    for _ in range(steps):
        if dec.invariant:
            break
        v = dec.v_next
        w = op.apply(v)
        scale = np.linalg.norm(w)
        a = float(np.real(np.vdot(v, w)))
        w = w - a * v
        if dec.v_prev is not None:
            w = w - dec.beta[-1] * dec.v_prev
        if dec.keep_basis:
            dec._V[:, dec.m] = v
            V = dec._V[:, : dec.m + 1]
            for _ in range(2):
                h = V.conj().T @ w
                w = w - V @ h
                a += float(np.real(h[-1]))
        bnext = float(np.linalg.norm(w))
        dec.alpha.append(a)
        dec.beta.append(bnext)
        dec.v_prev = v
        if bnext <= _BREAKDOWN_RTOL * max(scale, 1e-300):
            dec.invariant = True
            dec.v_next = np.zeros_like(v)
            break
        dec.v_next = w / bnext
    return dec


def tridiagonal_eigh(alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``tridiag(beta, alpha, beta)``.

    LAPACK's MRRR driver occasionally fails on tightly clustered Ritz
    values; the QL/QR driver is used as a fallback.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == 1:
        return alpha.copy(), np.ones((1, 1))
    beta = np.asarray(beta, dtype=float)
    try:
        return eigh_tridiagonal(alpha, beta)
    except np.linalg.LinAlgError:
        return eigh_tridiagonal(alpha, beta, lapack_driver="stev")


def tridiagonal_function_e1(alpha, beta, f) -> np.ndarray:
    """``f(T) e_1`` for the symmetric tridiagonal ``T = tridiag(beta, alpha, beta)``.

    Raises
    ------
    SpectrumError
        If a Ritz value is not positive.
    """
    theta, S = tridiagonal_eigh(alpha, beta)
    if theta[0] <= 0:
        raise SpectrumError(f"nonpositive Ritz value {theta[0]:g}")
    return S @ (S[0, :] * f(theta))


def lanczos_fAb(op: LinearOperator, f: StieltjesFunction, b, m: int) -> np.ndarray:
    """Lanczos approximation ``||b|| V_m f(T_m) e_1`` after ``m`` steps.

    Stops early (and is then exact) if an invariant subspace is found.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    dec = lanczos_extend(op, lanczos_start(b, keep_basis=True), m)
    a, bt = dec.tridiagonal()
    y = dec.norm_b * tridiagonal_function_e1(a, bt, f)
    return dec.basis @ y


def lanczos_error_bound(bounds: SpectralBounds, f: StieltjesFunction, m: int, norm_b: float) -> float:
    """A-norm error bound ``C alpha_m(t0)`` for the Lanczos approximation.

    ``C = ||b|| sqrt(lambda_max) f(sqrt(lambda_min lambda_max))`` and
    ``alpha_m(t) = 1 / cosh(m ln c(t))`` with ``c`` the CG factor of
    ``A + tI``.
    """
    lo, hi = bounds.lambda_min, bounds.lambda_max
    C = norm_b * np.sqrt(hi) * float(f(np.sqrt(lo * hi)))
    return C * alpha_m(m, shifted_kappa(lo, hi, f.t0))


def _lagged_difference(new: np.ndarray, old: np.ndarray) -> float:
    diff = new.copy()
    diff[: old.size] -= old
    return float(np.linalg.norm(diff))


def two_pass_fAb(
    op: LinearOperator,
    f: StieltjesFunction,
    b,
    tol: float,
    m_max: int | None = None,
    stopping: str = "difference",
    reference=None,
    bounds: SpectralBounds | None = None,
    d: int = 5,
):
    """Two-pass Lanczos approximation of ``f(A) b``.

    Parameters
    ----------
    op, f, b
        Operator, function and vector.
    tol : float
        Relative tolerance.
    m_max : int, optional
        Iteration cap for the first pass (default ``op.n``).
    stopping : {"difference", "oracle"}
        ``"difference"`` estimates the error from ``delta = ||y_m - y_{m-d}||``
        as ``delta q / (1 - q)``, where ``q`` is the observed contraction
        ``delta / ||y_{m-d} - y_{m-2d}||`` or, with ``bounds``, ``c(t0)**d``.
        With ``bounds`` the a-priori bound (converted from the A-norm)
        is used as well, whichever is smaller. ``"oracle"`` stops on the true relative error
        against ``reference``; to measure it the first pass keeps the
        Lanczos vectors, so this mode is a measurement aid and does not
        respect the memory bound.
    reference : array_like, optional
        Exact ``f(A) b``; required for ``"oracle"``, used for reporting
        otherwise.
    bounds : SpectralBounds, optional
        Enables the bound-based stop.
    d : int
        Lag of the difference rule.

    Returns
    -------
    x : ndarray
    report : MethodReport
        ``matvecs`` is ``2 m``: the second pass repeats all ``m`` products
        and uses the last one to check that the recurrence reproduced the
        first pass.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if stopping not in ("difference", "oracle"):
        raise ValueError(f"unknown stopping rule {stopping!r}")
    if stopping == "oracle" and reference is None:
        raise ValueError("oracle stopping needs a reference solution")
    b = np.asarray(b)
    m_max = op.n if m_max is None else int(m_max)
    count0 = op.matvec_count
    report = MethodReport(method="two_pass")

    ref = None if reference is None else np.asarray(reference)
    ref_norm = None if ref is None else float(np.linalg.norm(ref))
    # oracle mode only: the vectors are kept to evaluate the true error
    vecs: list[np.ndarray] = []

    dec = lanczos_start(b, keep_basis=False)
    recent: deque[np.ndarray] = deque(maxlen=2 * d + 1)
    q_fixed = None
    if bounds is not None:
        q_fixed = cg_factor(shifted_kappa(bounds.lambda_min, bounds.lambda_max, f.t0)) ** d
    y = None
    est = np.inf
    while dec.m < m_max:
        if stopping == "oracle":
            vecs.append(dec.v_next)
        lanczos_extend(op, dec, 1)
        a, bt = dec.tridiagonal()
        y = dec.norm_b * tridiagonal_function_e1(a, bt, f)
        ny = float(np.linalg.norm(y))
        recent.append(y)
        if stopping == "oracle":
            xm = np.column_stack(vecs) @ y
            est = report.relative_error = float(np.linalg.norm(xm - ref)) / ref_norm
        else:
            est = np.inf
            if len(recent) >= d + 1:
                diff = _lagged_difference(recent[-1], recent[-1 - d])
                if q_fixed is not None:
                    q = q_fixed
                elif len(recent) == 2 * d + 1:
                    prev = _lagged_difference(recent[-1 - d], recent[0])
                    q = min(diff / prev, _Q_MAX) if prev > 0 else 0.0
                else:
                    q = None
                if q is not None:
                    # geometric tail: err_m ~ diff * q / (1 - q), q = rate**d
                    est = diff * q / (1.0 - q) / ny
            if bounds is not None:
                bound = lanczos_error_bound(bounds, f, dec.m, dec.norm_b) / np.sqrt(bounds.lambda_min)
                est = min(est, bound / ny)
        report.history.append(est)
        if est <= tol or dec.invariant:
            break
    m = dec.m
    report.iterations = m
    report.error_estimate = est
    if not (est <= tol or dec.invariant):
        report.matvecs = op.matvec_count - count0
        raise ConvergenceError(f"two-pass Lanczos did not converge within {m_max} steps (m={m})", None, report)

    # second pass: regenerate v_1..v_m from the stored recurrence coefficients
    v = b / dec.norm_b
    v_prev = None
    x = y[0] * v
    drift = 0.0
    for i in range(m):
        w = op.apply(v)
        if i == m - 1:
            drift = abs(float(np.real(np.vdot(v, w))) - dec.alpha[i])
            break
        w = w - dec.alpha[i] * v
        if v_prev is not None:
            w = w - dec.beta[i - 1] * v_prev
        v_prev, v = v, w / dec.beta[i]
        x = x + y[i + 1] * v
    report.converged = True
    report.matvecs = op.matvec_count - count0
    report.extra["alpha_drift"] = drift
    report.extra["invariant"] = dec.invariant
    if ref is not None:
        report.relative_error = float(np.linalg.norm(x - ref)) / ref_norm
    return x, report
