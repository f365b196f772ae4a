"""Shift-and-invert Lanczos and the extended Krylov method with inexact solves.

Shift-and-invert (SI) runs Lanczos on ``B = (A - xi I)^{-1}`` and
approximates ``g(B) b`` for ``g(y) = f(1/y + xi)``; the default output is
the corrected approximation

    ||b|| V_m g(H_m) e_1 + ||b|| h_{m+1,m} (e_m^T H_m^{-1} g(H_m) e_1) v_{m+1}.

Its error is ``B int e_m(t) dmu(t)`` with ``e_m(t)`` the CG error for
``(I + (xi + t) B) x = b``.

The extended Krylov method (EKSM) builds an orthonormal basis of
``span{b, A^{-1} b, A b, A^{-2} b, ...}``, one inverse and one forward
direction per iteration, and returns ``||b|| V f(V^H A V) e_1``.

Both methods solve their linear systems with CG. The residual tolerance of
the ``j``-th solve grows geometrically from ``eps_1`` with a fixed ratio.
Inexact solves turn SI into an Arnoldi process for ``B + E_m`` with
``||E_m|| <= ||B|| sqrt(sum_j ||r_j||^2)``, which is tracked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from ._factors import alpha_m, cg_factor
from .operators import LinearOperator, SpectralBounds
from .report import ConvergenceError, KrylovError, MethodReport, SpectrumError
from .stieltjes import StieltjesFunction, integrate_measure

_EIGVEC_COND_MAX = 1e8


@dataclass(frozen=True)
class InnerSolveConfig:
    """Inner CG tolerance schedule ``eps_j = eps_1 * ratio**(j-1)``.

    ``exact=True`` bypasses CG and uses the operator's exact shifted solve
    (diagonal or dense operators only); used for reference runs.
    """

    eps1: float
    ratio: float = 1.0
    max_inner: int = 100_000
    exact: bool = False

    def __post_init__(self):
        if not self.exact and not (self.eps1 > 0):
            raise ValueError("eps1 must be positive")
        if self.ratio < 1:
            raise ValueError("the schedule must be nondecreasing (ratio >= 1)")

    def tolerance(self, j: int) -> float:
        """Residual tolerance of the ``j``-th solve (``j >= 1``)."""
        return self.eps1 * self.ratio ** (j - 1)

    @classmethod
    def exact_solves(cls) -> "InnerSolveConfig":
        return cls(eps1=0.0, ratio=1.0, exact=True)


@dataclass
class InexactDecomposition:
    """Arnoldi data of an inexact shift-and-invert run.

    ``H`` is ``(m+1) x m`` upper Hessenberg, ``V`` holds ``m+1`` columns,
    ``residual_norms`` the inner residual norms and ``em_bounds`` the
    running bound on ``||E_j||`` after each step.
    """

    H: np.ndarray
    V: np.ndarray
    residual_norms: list[float] = field(default_factory=list)
    em_bounds: list[float] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.residual_norms)


def optimal_shift(bounds: SpectralBounds) -> float:
    """``xi = -sqrt(lambda_min lambda_max)``, equalising both ends of the SI bound."""
    return -bounds.geometric_mean


class TransformedFunction:
    """``g(y) = f(1/y + xi)`` on ``0 < y <= -1/xi``.

    Also available in integral form
    ``g(y) = y int 1 / (1 + (xi + t) y) dmu(t)`` via :meth:`integral`.
    """

    def __init__(self, f: StieltjesFunction, xi: float):
        if not xi < 0:
            raise ValueError("xi must be negative")
        self.f = f
        self.xi = float(xi)

    @property
    def y_max(self) -> float:
        return -1.0 / self.xi

    def __call__(self, y):
        y = np.asarray(y)
        if np.isrealobj(y) and (np.any(y <= 0) or np.any(y > self.y_max)):
            raise ValueError(f"g is defined on (0, {self.y_max:g}]")
        return self.f(1.0 / y + self.xi)

    def unchecked(self, y):
        """Evaluate without the domain check (complex Ritz values)."""
        return self.f(1.0 / np.asarray(y) + self.xi)

    def integral(self, y: float, tol: float = 1e-12) -> float:
        if not (0 < y <= self.y_max):
            raise ValueError(f"g is defined on (0, {self.y_max:g}]")
        return float(y * integrate_measure(self.f, lambda t: 1.0 / (1.0 + (self.xi + t) * y), tol))


def transformed_g(f: StieltjesFunction, xi: float) -> TransformedFunction:
    """The function ``y -> f(1/y + xi)``."""
    return TransformedFunction(f, xi)


def cg_solve(op: LinearOperator, rhs, tol: float, shift: float = 0.0, maxiter: int = 100_000):
    """CG for ``(A - shift I) x = rhs`` from a zero initial guess.

    Returns
    -------
    x : ndarray
    r : ndarray
        Recursively updated residual ``rhs - (A - shift I) x``.
    iters : int
        Number of matvecs spent.
    """
    rhs = np.asarray(rhs)
    x = np.zeros_like(rhs, dtype=np.result_type(rhs, float))
    r = rhs.astype(x.dtype).copy()
    p = r.copy()
    rr = float(np.real(np.vdot(r, r)))
    k = 0
    while np.sqrt(rr) > tol:
        if k >= maxiter:
            raise ConvergenceError(f"inner CG did not reach {tol:g} in {maxiter} iterations", x)
        Ap = op.apply(p) - shift * p
        curv = float(np.real(np.vdot(p, Ap)))
        if curv <= 0:
            raise SpectrumError("negative curvature in inner CG")
        a = rr / curv
        x += a * p
        r -= a * Ap
        rr_new = float(np.real(np.vdot(r, r)))
        p = r + (rr_new / rr) * p
        rr = rr_new
        k += 1
    return x, r, k


def _inner_solve(op, v, tol, shift, config: InnerSolveConfig):
    if config.exact:
        w = op.solve_shifted(v, shift)
        return w, np.zeros_like(w), 0
    return cg_solve(op, v, tol, shift=shift, maxiter=config.max_inner)


def _perturbation_prefactor(f: StieltjesFunction, bounds: SpectralBounds, xi: float) -> float:
    lo, hi = bounds.lambda_min, bounds.lambda_max
    return float((lo - xi) * abs(f.derivative(lo)) + (hi - xi) * abs(f.derivative(np.sqrt(lo * hi))))


def inner_tolerance_schedule(
    eps_target: float,
    f: StieltjesFunction,
    bounds: SpectralBounds,
    xi: float,
    ratio: float | None = None,
    strict: bool = False,
    max_outer: int = 200,
) -> InnerSolveConfig:
    """Relaxed inner tolerances for an absolute outer target ``eps_target``.

    ``eps_1 = eps / (2 ((lmin - xi)|f'(lmin)| + (lmax - xi)|f'(sqrt(lmin lmax))|))``
    and ``ratio = 1/alpha(0)`` unless given.

    With ``strict=True`` no relaxation takes place: every residual gets
    ``eps_1 / sqrt(max_outer)``, so that ``||R_m|| <= eps_1`` holds for any
    ``m <= max_outer`` and the perturbation term stays below ``eps / 2``.
    """
    if eps_target <= 0:
        raise ValueError("eps_target must be positive")
    P = _perturbation_prefactor(f, bounds, xi)
    if not np.isfinite(P) or P <= 0:
        raise KrylovError("derivative prefactor is not a positive finite number")
    eps1 = eps_target / (2.0 * P)
    if strict:
        return InnerSolveConfig(eps1=eps1 / np.sqrt(max_outer), ratio=1.0)
    if ratio is None:
        a0 = cg_factor(np.sqrt(bounds.kappa))
        ratio = 1.0 / a0 if a0 > 0 else 1.0
    return InnerSolveConfig(eps1=eps1, ratio=ratio)


def em_norm_bound(residual_norms, norm_B: float) -> float:
    """``||B|| sqrt(sum ||r_j||^2)``, a bound on the SI perturbation ``||E_m||``."""
    r = np.asarray(residual_norms, dtype=float)
    if np.any(r < 0):
        raise ValueError("residual norms must be nonnegative")
    return float(norm_B * np.sqrt(np.sum(r**2)))


def hessenberg_function_e1(H: np.ndarray, g: TransformedFunction, tol: float = 1e-12) -> np.ndarray:
    """``g(H) e_1`` for a small (possibly non-symmetric) matrix ``H``.

    Uses a complex eigendecomposition; if the eigenvector matrix is too
    ill-conditioned it falls back to quadrature of
    ``H (I + (xi + t) H)^{-1} e_1`` over the measure.
    """
    m = H.shape[0]
    e1 = np.zeros(m)
    e1[0] = 1.0
    if np.allclose(H, H.T, rtol=0, atol=1e-14 * max(1.0, np.abs(H).max())):
        theta, S = np.linalg.eigh(0.5 * (H + H.T))
        return S @ (S[0, :] * g.unchecked(theta))
    ev, X = np.linalg.eig(H)
    if np.linalg.cond(X) <= _EIGVEC_COND_MAX:
        c = np.linalg.solve(X, e1.astype(complex))
        return np.real(X @ (g.unchecked(ev) * c))
    I = np.eye(m)

    def integrand(t):
        return np.array([H @ np.linalg.solve(I + (g.xi + tk) * H, e1) for tk in np.atleast_1d(t)])

    return integrate_measure(g.f, integrand, tol)


def si_error_bound(bounds: SpectralBounds, f: StieltjesFunction, m: int, norm_b: float = 1.0,
                   tol: float = 1e-10) -> float:
    """Error bound of exact corrected SI Lanczos with the optimal shift.

    ``||b|| sqrt(kappa) (sqrt(kappa) f1(lmin) + f2(sqrt(lmin lmax))) alpha_m(0)``
    where ``f1`` and ``f2`` split the measure at ``-xi`` and ``alpha_m(0)``
    uses the CG factor of condition ``sqrt(kappa)``.
    """
    lo, hi = bounds.lambda_min, bounds.lambda_max
    xi = optimal_shift(bounds)
    kap = bounds.kappa
    split = -xi

    def part(z, lower):
        if f.is_discrete:
            t, w = f.quadrature_rule(0)
            inside = (t < split) if lower else (t >= split)
            return float(np.sum(w[inside] / (t[inside] + z)))
        a, b = (f.t0, split) if lower else (max(split, f.t0), np.inf)
        # adaptive QUADPACK copes with the jump of the split integrand
        return quad(lambda t: f.density(t) / (t + z), a, b, epsabs=0.0, epsrel=tol, limit=500)[0]

    f1 = part(lo, True) if f.t0 < split else 0.0
    f2 = part(np.sqrt(lo * hi), False)
    return norm_b * np.sqrt(kap) * (np.sqrt(kap) * f1 + f2) * alpha_m(m, np.sqrt(kap))


def _stop_estimate(stopping, ref, ref_norm, x, previous, rho):
    """Relative error estimate used by the rational methods.

    ``previous`` holds the last two iterates (newest last). The difference
    to the iterate ``d`` steps back is scaled by the geometric tail
    ``rho^d / (1 - rho^d)``; the larger of ``d = 1, 2`` is returned since
    the error often stalls every other step.
    """
    if stopping == "oracle":
        return float(np.linalg.norm(x - ref)) / ref_norm
    if not previous:
        return np.inf
    nx = float(np.linalg.norm(x))
    est = 0.0
    for d, old in enumerate(reversed(previous), start=1):
        diff = float(np.linalg.norm(x - old))
        q = rho**d
        est = max(est, diff * q / (1.0 - q) if q < 1 else diff)
    return est / nx


def si_lanczos_fAb(
    op: LinearOperator,
    f: StieltjesFunction,
    b,
    tol: float,
    bounds: SpectralBounds,
    inner: InnerSolveConfig | None = None,
    xi: float | None = None,
    corrected: bool = True,
    m_max: int = 300,
    stopping: str = "difference",
    reference=None,
    record_history: bool = False,
):
    """Shift-and-invert Lanczos approximation of ``f(A) b``.

    Parameters
    ----------
    tol : float
        Relative tolerance.
    inner : InnerSolveConfig, optional
        Default: :func:`inner_tolerance_schedule` with ``eps = tol ||b||``.
    xi : float, optional
        Shift; default :func:`optimal_shift`.
    corrected : bool
        Return the corrected approximation (default) or the standard one.
    stopping : {"difference", "oracle"}
        ``"difference"`` estimates the error from the last correction and
        the rate ``alpha(0)``; ``"oracle"`` uses ``reference``.
    record_history : bool
        Keep every iterate's relative error (needs ``reference``) in
        ``report.extra["errors"]``.

    Returns
    -------
    x : ndarray
    report : MethodReport
        ``matvecs`` counts inner CG products only; ``extra`` holds the
        inner iteration counts, tolerances, residual norms and the
        ``||E_m||`` bound after each step.
    """
    if stopping not in ("difference", "oracle"):
        raise ValueError(f"unknown stopping rule {stopping!r}")
    if stopping == "oracle" and reference is None:
        raise ValueError("oracle stopping needs a reference solution")
    b = np.asarray(b)
    nb = float(np.linalg.norm(b))
    xi = optimal_shift(bounds) if xi is None else float(xi)
    g = transformed_g(f, xi)
    if inner is None:
        inner = inner_tolerance_schedule(tol * nb, f, bounds, xi)
    norm_B = 1.0 / (bounds.lambda_min - xi)
    k_inf = (bounds.lambda_max - xi) / (bounds.lambda_min - xi)
    rho = cg_factor(max(k_inf, bounds.kappa / k_inf))
    ref = None if reference is None else np.asarray(reference)
    ref_norm = None if ref is None else float(np.linalg.norm(ref))

    count0 = op.matvec_count
    n = b.size
    dtype = np.result_type(b, float)
    V = np.zeros((n, m_max + 1), dtype=dtype)
    H = np.zeros((m_max + 1, m_max))
    V[:, 0] = b / nb
    dec = InexactDecomposition(H=H, V=V)
    report = MethodReport(method="si")
    inner_counts: list[int] = []
    inner_tols: list[float] = []
    errors: list[float] = []
    x = None
    previous: list = []
    est = np.inf
    m = 0
    for m in range(1, m_max + 1):
        tol_j = inner.tolerance(m)
        w, r, k = _inner_solve(op, V[:, m - 1], tol_j, xi, inner)
        inner_counts.append(k)
        inner_tols.append(tol_j)
        dec.residual_norms.append(float(np.linalg.norm(r)))
        dec.em_bounds.append(em_norm_bound(dec.residual_norms, norm_B))
        for _ in range(2):
            h = V[:, :m].conj().T @ w
            w = w - V[:, :m] @ h
            H[:m, m - 1] += np.real(h)
        H[m, m - 1] = np.linalg.norm(w)
        breakdown = H[m, m - 1] <= 1e-14 * np.abs(H[:m, m - 1]).max()
        if not breakdown:
            V[:, m] = w / H[m, m - 1]
        G = hessenberg_function_e1(H[:m, :m], g)
        x = nb * (V[:, :m] @ G)
        if corrected and not breakdown:
            # correction uses h(y) = g(y)/y, so that the error is B int e_m(t) dmu
            x = x + nb * H[m, m - 1] * np.linalg.solve(H[:m, :m], G)[m - 1] * V[:, m]
        if ref is not None:
            errors.append(float(np.linalg.norm(x - ref)) / ref_norm)
        est = _stop_estimate(stopping, ref, ref_norm, x, previous, rho)
        report.history.append(est)
        if est <= tol or breakdown:
            break
        previous = (previous + [x])[-2:]
    report.iterations = m
    report.matvecs = op.matvec_count - count0
    report.inner_matvecs = report.matvecs
    report.error_estimate = est
    if ref is not None:
        report.relative_error = errors[-1]
    report.extra.update(xi=xi, inner_iterations=inner_counts, inner_tolerances=inner_tols,
                        residual_norms=list(dec.residual_norms), em_bounds=list(dec.em_bounds),
                        eps1=inner.eps1, ratio=inner.ratio)
    if record_history:
        report.extra["errors"] = errors
    report.extra["decomposition"] = InexactDecomposition(H=H[: m + 1, :m].copy(), V=V[:, : m + 1],
                                                         residual_norms=dec.residual_norms,
                                                         em_bounds=dec.em_bounds)
    if not est <= tol and not breakdown:
        raise ConvergenceError(f"SI Lanczos did not converge in {m_max} iterations", x, report)
    report.converged = True
    return x, report


def extended_krylov_fAb(
    op: LinearOperator,
    f: StieltjesFunction,
    b,
    tol: float,
    inner: InnerSolveConfig | None = None,
    bounds: SpectralBounds | None = None,
    m_max: int = 150,
    stopping: str = "difference",
    reference=None,
    record_history: bool = False,
):
    """Extended Krylov approximation ``||b|| V f(V^H A V) e_1``.

    Each iteration adds one CG approximation of ``A^{-1} v`` (last inverse
    direction) and one product ``A v`` (last forward direction). ``A V``
    is maintained alongside ``V``: inverse directions get ``A w = v - r``
    from the CG residual, forward directions cost one matvec, so the
    projected matrix needs no extra products.

    Parameters
    ----------
    inner : InnerSolveConfig, optional
        Default: :func:`inner_tolerance_schedule` with ``eps = tol ||b||``,
        the optimal-shift prefactor and ratio ``alpha(0)^{-2}``, matching
        the per-iteration rate ``alpha(0)^2`` (needs ``bounds``).
    bounds : SpectralBounds, optional
        Required unless ``inner`` is given; also sets the rate used by the
        difference stopping rule.

    Returns
    -------
    x : ndarray
    report : MethodReport
        ``matvecs`` includes the inner CG products; ``extra`` holds the
        inner iteration counts and tolerances.
    """
    if stopping not in ("difference", "oracle"):
        raise ValueError(f"unknown stopping rule {stopping!r}")
    if stopping == "oracle" and reference is None:
        raise ValueError("oracle stopping needs a reference solution")
    b = np.asarray(b)
    nb = float(np.linalg.norm(b))
    if inner is None:
        if bounds is None:
            raise ValueError("bounds are needed to build the default inner schedule")
        a0 = cg_factor(np.sqrt(bounds.kappa))
        inner = inner_tolerance_schedule(tol * nb, f, bounds, optimal_shift(bounds),
                                         ratio=1.0 / a0**2 if a0 > 0 else 1.0)
    rho = cg_factor(np.sqrt(bounds.kappa)) ** 2 if bounds is not None else 1.0
    ref = None if reference is None else np.asarray(reference)
    ref_norm = None if ref is None else float(np.linalg.norm(ref))

    count0 = op.matvec_count
    n = b.size
    cap = min(2 * m_max + 1, n)
    dtype = np.result_type(b, float)
    V = np.zeros((n, cap), dtype=dtype)
    AV = np.zeros((n, cap), dtype=dtype)
    V[:, 0] = b / nb
    AV[:, 0] = op.apply(V[:, 0])
    dim = 1
    i_neg = i_pos = 0
    report = MethodReport(method="eksm")
    inner_counts: list[int] = []
    inner_tols: list[float] = []
    errors: list[float] = []
    x = None
    previous: list = []
    est = np.inf
    exhausted = False
    m = 0

    def add(w, Aw):
        nonlocal dim, exhausted
        for _ in range(2):
            h = V[:, :dim].conj().T @ w
            w = w - V[:, :dim] @ h
            if Aw is not None:
                Aw = Aw - AV[:, :dim] @ h
        hn = float(np.linalg.norm(w))
        if hn <= 1e-12 or dim >= cap:
            exhausted = True
            return None
        V[:, dim] = w / hn
        if Aw is not None:
            AV[:, dim] = Aw / hn
        dim += 1
        return dim - 1

    for m in range(1, m_max + 1):
        tol_j = inner.tolerance(m)
        w, r, k = _inner_solve(op, V[:, i_neg], tol_j, 0.0, inner)
        inner_counts.append(k)
        inner_tols.append(tol_j)
        j = add(w, V[:, i_neg] - r)
        if j is not None:
            i_neg = j
            j = add(AV[:, i_pos].copy(), None)
            if j is not None:
                AV[:, j] = op.apply(V[:, j])
                i_pos = j
        T = V[:, :dim].conj().T @ AV[:, :dim]
        T = 0.5 * (T + T.conj().T)
        theta, S = np.linalg.eigh(T)
        if theta[0] <= 0:
            raise SpectrumError(f"nonpositive Ritz value {theta[0]:g}")
        x = nb * (V[:, :dim] @ (S @ (S[0, :].conj() * f(theta))))
        if ref is not None:
            errors.append(float(np.linalg.norm(x - ref)) / ref_norm)
        est = _stop_estimate(stopping, ref, ref_norm, x, previous, rho)
        report.history.append(est)
        if est <= tol or exhausted:
            break
        previous = (previous + [x])[-2:]
    report.iterations = m
    report.matvecs = op.matvec_count - count0
    report.inner_matvecs = int(sum(inner_counts))
    report.error_estimate = est
    if ref is not None:
        report.relative_error = errors[-1]
    report.extra.update(inner_iterations=inner_counts, inner_tolerances=inner_tols,
                        eps1=inner.eps1, ratio=inner.ratio, dimension=dim)
    if record_history:
        report.extra["errors"] = errors
    if not est <= tol and not exhausted:
        raise ConvergenceError(f"EKSM did not converge in {m_max} iterations", x, report)
    report.converged = True
    return x, report
