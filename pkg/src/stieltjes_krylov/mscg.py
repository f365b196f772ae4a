"""Multi-shift CG on a partial-fraction rational approximation of f.

``f(A) b ~ r(A) b = sum_i omega_i (A - zeta_i I)^{-1} b`` with negative
poles ``zeta_i``. All shifted systems share one Krylov space, so a single
CG recurrence (the seed system, the pole closest to the spectrum) drives
every system at the cost of one matvec per iteration. Systems whose
residual meets their share of the tolerance are frozen.

For ``f(z) = z^{-1/2}`` the poles and weights come from Zolotarev's best
relative approximation, computed with Jacobi elliptic functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ellipj, ellipk

from .operators import LinearOperator, SpectralBounds
from .report import ConvergenceError, KrylovError, MethodReport, SpectrumError
from .stieltjes import StieltjesFunction

MAX_POLES = 100
_FROZEN_RTOL = 1e-15


@dataclass(frozen=True)
class RationalApproximation:
    """``r(z) = sum_i weights[i] / (z - poles[i])``.

    Attributes
    ----------
    poles : ndarray
        Negative reals sorted by increasing magnitude.
    weights : ndarray
    delta : float
        Uniform bound on ``|f(z) - r(z)|`` over ``interval``.
    interval : tuple of float
    relative_delta : float
        Uniform bound on ``|1 - r(z)/f(z)|`` (equioscillation level).
    form : str
        Only ``"first"`` (plain partial fractions) is produced here.
    """

    poles: np.ndarray
    weights: np.ndarray
    delta: float
    interval: tuple[float, float]
    relative_delta: float = np.nan
    form: str = "first"

    @property
    def p(self) -> int:
        return int(self.poles.size)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.sum(self.weights / (z[..., None] - self.poles), axis=-1)


def _zolotarev_nodes(lo: float, hi: float, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Poles and zeros of the unnormalised Zolotarev function on ``[lo, hi]``."""
    k2 = lo / hi
    m = 1.0 - k2
    K = ellipk(m)
    sn, cn, _, _ = ellipj(np.arange(1, 2 * p) * K / (2 * p), m)
    c = k2 * sn**2 / cn**2
    return -hi * c[0::2], -hi * c[1::2]


def _product_form(z, poles, zeros):
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    for q in zeros:
        out = out * (z - q)
    for q in poles:
        out = out / (z - q)
    return out


def zolotarev_inv_sqrt(bounds: SpectralBounds, p: int) -> RationalApproximation:
    """Best relative rational approximation of ``z^{-1/2}`` of type ``(p-1, p)``.

    The unnormalised approximant ``r0`` has poles ``-hi c_{2l-1}`` and zeros
    ``-hi c_{2l}`` with ``c_l = k^2 sn^2 / cn^2 (l K / (2p); 1 - k^2)`` and
    ``k^2 = lo / hi``. ``sqrt(z) r0(z)`` equioscillates between its minimum
    (attained at the end points) and its maximum; scaling by
    ``2 / (max + min)`` centres the relative error at ``+-delta_rel``.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    lo, hi = bounds.lambda_min, bounds.lambda_max
    if hi == lo:
        pole = np.array([-lo])
        w = np.array([2.0 * lo**0.5])
        return RationalApproximation(pole, w, 0.0, (lo, hi), 0.0)
    poles, zeros = _zolotarev_nodes(lo, hi, p)
    if not np.all(np.isfinite(poles)) or np.any(np.diff(np.sort(poles)) == 0):
        raise KrylovError(f"elliptic evaluation failed for p={p}")

    def h(u):
        z = np.exp(u)
        return np.sqrt(z) * _product_form(z, poles, zeros)

    # locate the interior maximum on a log grid, then polish it
    u = np.linspace(np.log(lo), np.log(hi), 20001)
    vals = h(u)
    i = int(np.argmax(vals))
    du = u[1] - u[0]
    a, b = max(u[0], u[i] - du), min(u[-1], u[i] + du)
    if b > a:
        res = minimize_scalar(lambda s: -h(s), bounds=(a, b), method="bounded", options={"xatol": 1e-14})
        gmax = max(float(vals[i]), float(-res.fun))
    else:
        gmax = float(vals[i])
    gmin = float(min(h(np.log(lo)), h(np.log(hi)), vals.min()))
    D = 2.0 / (gmax + gmin)
    rel = (gmax - gmin) / (gmax + gmin)
    # pair numerator and denominator factors to keep the products in range
    weights = np.array([
        D * np.prod((q - zeros) / (q - np.delete(poles, i)))
        for i, q in enumerate(poles)
    ])
    order = np.argsort(-poles)
    return RationalApproximation(
        poles=poles[order], weights=weights[order], delta=rel / np.sqrt(lo),
        interval=(lo, hi), relative_delta=rel,
    )


def sampled_error(f, r: RationalApproximation, n: int = 10_000, relative: bool = False) -> float:
    """Max of ``|f - r|`` (or ``|1 - r/f|``) on ``n`` log-spaced points."""
    z = np.geomspace(*r.interval, n)
    fz = f(z)
    e = np.abs(fz - r(z))
    return float(np.max(e / np.abs(fz) if relative else e))


def min_poles_for_tolerance(bounds: SpectralBounds, f_tag: str, delta_target: float) -> int:
    """Smallest ``p`` whose Zolotarev approximant has uniform error ``<= delta_target``.

    The reported error is cross-checked against dense sampling.
    """
    if delta_target <= 0:
        raise ValueError("delta_target must be positive")
    if f_tag != "inv_sqrt":
        raise ValueError(f"no rational approximation family for {f_tag!r}")
    prev = np.inf
    for p in range(1, MAX_POLES + 1):
        r = zolotarev_inv_sqrt(bounds, p)
        if r.relative_delta > 0.5 * prev and r.relative_delta < 1e-12:
            raise KrylovError(f"uniform error {delta_target:g} is below the attainable floor")
        prev = r.relative_delta
        if r.delta <= delta_target:
            sampled = sampled_error(lambda z: z**-0.5, r)
            if sampled <= delta_target * (1 + 1e-8):
                return p
    raise KrylovError(f"more than {MAX_POLES} poles required")


def rational_approximation(f: StieltjesFunction, bounds: SpectralBounds, delta_target: float,
                           p: int | None = None) -> RationalApproximation:
    """Partial-fraction approximation of ``f`` with uniform error ``<= delta_target``.

    Discrete measures are rational already (poles ``-t_k``, weights the
    masses). ``z^{-1/2}`` uses Zolotarev; ``p`` overrides the pole count.
    """
    lo, hi = bounds.lambda_min, bounds.lambda_max
    if f.is_discrete:
        t, w = f.quadrature_rule(0)
        order = np.argsort(t)
        return RationalApproximation(-t[order], w[order], 0.0, (lo, hi), 0.0)
    if f.name != "inv_sqrt":
        raise ValueError(f"no rational approximation family for {f.name!r}")
    if p is None:
        p = min_poles_for_tolerance(bounds, "inv_sqrt", delta_target)
    return zolotarev_inv_sqrt(bounds, p)


def multishift_cg(
    op: LinearOperator,
    b,
    shifts,
    tols,
    maxiter: int | None = None,
    monitor=None,
    weights=None,
):
    """Solve ``(A - zeta_i I) x_i = b`` for all shifts with one recurrence.

    Parameters
    ----------
    shifts : sequence of float
        ``zeta_i``; ``A - zeta_i I`` must be positive definite.
    tols : float or sequence of float
        Absolute residual tolerances per system.
    maxiter : int, optional
        Default ``10 n``.
    monitor : callable, optional
        ``monitor(k, xs)`` is called after every iteration; returning True
        stops the iteration early (used for oracle-based stopping).
    weights : sequence of float, optional
        If given, only the weighted sum ``sum_i weights[i] x_i`` is
        accumulated (one vector instead of ``p``) and returned as the single
        entry of ``xs``; ``monitor`` then sees that sum as a ``(1, n)`` array.

    Returns
    -------
    xs : list of ndarray
        In the order of ``shifts``.
    report : MethodReport
        ``extra["residuals"]`` holds final residual norms, ``extra["converged_at"]``
        the iteration at which each system was frozen and
        ``extra["active"]`` the number of live systems per iteration.

    Notes
    -----
    The seed is the largest shift (the worst conditioned system). With
    ``sigma_i = zeta_seed - zeta_i >= 0`` the shifted residuals are
    ``r_i = z_i r_seed`` where ``z_i`` obeys the usual three-term scalar
    recurrence of shifted CG.
    """
    b = np.asarray(b)
    shifts = np.asarray(shifts, dtype=float)
    p = shifts.size
    tols = np.broadcast_to(np.asarray(tols, dtype=float), (p,)).copy()
    maxiter = 10 * op.n if maxiter is None else int(maxiter)
    count0 = op.matvec_count
    seed = int(np.argmax(shifts))
    zs = shifts[seed]
    sigma = zs - shifts

    dtype = np.result_type(b, float)
    wts = None if weights is None else np.asarray(weights, dtype=float)
    xs = np.zeros((p if wts is None else 1, b.size), dtype=dtype)
    ps = np.tile(b.astype(dtype), (p, 1))
    r = b.astype(dtype).copy()
    rr = float(np.real(np.vdot(r, r)))
    nb = np.sqrt(rr)
    zeta = np.ones(p)
    zeta_old = np.ones(p)
    alpha_old, beta_old = 1.0, 0.0
    active = np.sqrt(rr) * np.abs(zeta) > tols
    converged_at = np.where(active, -1, 0)
    active_hist: list[int] = []
    report = MethodReport(method="multishift_cg")

    k = 0
    p_seed = r.copy()
    while active.any() and k < maxiter:
        Ap = op.apply(p_seed) - zs * p_seed
        curv = float(np.real(np.vdot(p_seed, Ap)))
        if curv <= 0:
            raise SpectrumError("negative curvature: a shifted system is not positive definite")
        alpha = rr / curv
        idx = np.flatnonzero(active)
        active_hist.append(idx.size)
        # scalar recurrences for the shifted systems
        denom = (alpha * beta_old * (zeta_old[idx] - zeta[idx])
                 + zeta_old[idx] * alpha_old * (1.0 + sigma[idx] * alpha))
        zeta_new = zeta[idx] * zeta_old[idx] * alpha_old / denom
        alpha_s = alpha * zeta_new / zeta[idx]
        if wts is None:
            xs[idx] += alpha_s[:, None] * ps[idx]
        else:
            xs[0] += (wts[idx] * alpha_s) @ ps[idx]
        r = r - alpha * Ap
        rr_new = float(np.real(np.vdot(r, r)))
        beta = rr_new / rr
        beta_s = (zeta_new / zeta[idx]) ** 2 * beta
        ps[idx] = zeta_new[:, None] * r[None, :] + beta_s[:, None] * ps[idx]
        zeta_old[idx] = zeta[idx]
        zeta[idx] = zeta_new
        p_seed = r + beta * p_seed
        rr, alpha_old, beta_old = rr_new, alpha, beta
        k += 1
        res = np.sqrt(rr) * np.abs(zeta)
        done = active & ((res <= tols) | (res <= _FROZEN_RTOL * nb))
        converged_at[done] = k
        active &= ~done
        if monitor is not None and monitor(k, xs):
            converged_at[active] = k
            active[:] = False

    report.iterations = k
    report.matvecs = op.matvec_count - count0
    report.converged = not active.any()
    report.extra.update(residuals=(np.sqrt(rr) * np.abs(zeta)).tolist(),
                        converged_at=converged_at.tolist(), active=active_hist, seed=seed)
    out = [xs[i] for i in range(xs.shape[0])]
    if not report.converged:
        raise ConvergenceError(f"multi-shift CG did not converge in {maxiter} iterations", out, report)
    return out, report


def mscg_fAb(
    op: LinearOperator,
    f: StieltjesFunction,
    b,
    tol: float,
    bounds: SpectralBounds,
    p: int | None = None,
    norm_fAb: float | None = None,
    reference=None,
    maxiter: int | None = None,
    stopping: str = "tolerance",
    single_vector: bool = False,
):
    """Multi-shift CG approximation of ``f(A) b`` to relative accuracy ``tol``.

    The absolute target is ``eps = tol ||f(A)b||``; half of it goes to the
    rational approximation (uniform error ``eps / (2 ||b||)``) and half to
    the linear solves, split evenly over the poles:
    ``||res_i|| <= eps (lambda_min - zeta_i) / (2 p |omega_i|)``.

    ``||f(A)b||`` is taken from ``reference``, else ``norm_fAb``, else the
    lower bound ``f(lambda_max) ||b||``, which keeps the target safe.

    With ``stopping="oracle"`` the iteration additionally stops as soon as
    the combined iterate is within ``tol`` of ``reference``.
    ``single_vector=True`` accumulates only the weighted sum instead of all
    ``p`` shifted solutions, saving ``p - 1`` vectors of storage.

    Returns
    -------
    x : ndarray
    report : MethodReport
        ``extra`` carries the pole count, poles, weights, rational error and
        the per-system freeze iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b)
    nb = float(np.linalg.norm(b))
    ref = None if reference is None else np.asarray(reference)
    if ref is not None:
        scale = float(np.linalg.norm(ref))
    elif norm_fAb is not None:
        scale = float(norm_fAb)
    else:
        scale = float(f(bounds.lambda_max)) * nb
    eps = tol * scale
    r = rational_approximation(f, bounds, eps / (2.0 * nb), p=p)
    tols = eps * (bounds.lambda_min - r.poles) / (2.0 * r.p * np.abs(r.weights))
    if stopping not in ("tolerance", "oracle"):
        raise ValueError(f"unknown stopping rule {stopping!r}")
    monitor = None
    if stopping == "oracle":
        if ref is None:
            raise ValueError("oracle stopping needs a reference solution")
        w = np.ones(1) if single_vector else r.weights

        def monitor(k, xs):
            return np.linalg.norm(w @ xs - ref) <= tol * scale

    count0 = op.matvec_count
    try:
        xs, inner = multishift_cg(op, b, r.poles, tols, maxiter=maxiter, monitor=monitor,
                                  weights=r.weights if single_vector else None)
    except ConvergenceError as exc:
        exc.report.method = "mscg"
        raise
    x = xs[0] if single_vector else sum(w * xi for w, xi in zip(r.weights, xs))
    report = MethodReport(method="mscg", converged=True, iterations=inner.iterations,
                          matvecs=op.matvec_count - count0, error_estimate=eps / scale)
    report.extra.update(p=r.p, poles=r.poles.tolist(), weights=r.weights.tolist(),
                        rational_delta=r.delta, system_tols=tols.tolist(),
                        converged_at=inner.extra["converged_at"], active=inner.extra["active"])
    if ref is not None:
        report.relative_error = float(np.linalg.norm(x - ref)) / scale
    return x, report
