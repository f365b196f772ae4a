"""Stieltjes functions ``f(z) = int dmu(t) / (t + z)`` and quadrature over mu.

A :class:`StieltjesFunction` bundles the closed form of ``f`` and ``f'``
with its measure, either as a density on ``(t0, inf)`` or as a finite set
of atoms. :func:`integrate_measure` integrates any function of ``t``
against the measure with an adaptive Gauss-Legendre rule.

The density is integrated in the variable ``x in (-1, 1)`` through
``t = t0 + s**q`` with ``s = (1 - x) / (1 + x)``, using 16-point panels
whose number doubles until two estimates agree. The exponent ``q`` is
chosen per function so that an algebraic endpoint singularity of the
density cancels against the Jacobian (``q = 2`` for ``1/sqrt(t)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from .report import QuadratureError

MAX_NODES = 2**15


PANEL_NODES = 16


@lru_cache(maxsize=32)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on (-1, 1) with ``n`` nodes.

    ``n`` is a multiple of :data:`PANEL_NODES`; the interval is split into
    ``n / PANEL_NODES`` equal panels, each carrying a 16-point rule.
    """
    panels = max(1, n // PANEL_NODES)
    x0, w0 = roots_legendre(PANEL_NODES)
    h = 2.0 / panels
    left = -1.0 + h * np.arange(panels)
    x = (left[:, None] + 0.5 * h * (x0[None, :] + 1.0)).ravel()
    w = np.tile(0.5 * h * w0, panels)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class StieltjesFunction:
    """A Stieltjes function with its defining measure.

    Parameters
    ----------
    name : str
        Tag used in reports and CLI output.
    value : callable
        ``z -> f(z)``; must accept numpy arrays (complex arrays too, for
        evaluation on perturbed Hessenberg spectra).
    derivative : callable
        ``z -> f'(z)``.
    t0 : float
        Left end point of the support of the measure.
    density : callable, optional
        ``t -> w(t)`` with ``dmu(t) = w(t) dt`` on ``(t0, inf)``.
    power : float
        Exponent ``q`` of the substitution ``t = t0 + s**q``.
    atoms : tuple of (t, mass) pairs, optional
        Discrete measure. Used instead of ``density`` when given.
    """

    name: str
    value: Callable
    derivative: Callable
    t0: float
    density: Callable | None = None
    power: float = 1.0
    atoms: tuple[tuple[float, float], ...] | None = None

    def __call__(self, z):
        return self.value(z)

    def quadrature_rule(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``t`` and weights ``w`` with ``sum(w * g(t)) ~ int g dmu``.

        Discrete measures ignore ``n`` and return their atoms.
        """
        if self.atoms is not None:
            t = np.array([a[0] for a in self.atoms], dtype=float)
            m = np.array([a[1] for a in self.atoms], dtype=float)
            return t, m
        x, w = _legendre(n)
        s = (1.0 - x) / (1.0 + x)
        ds = 2.0 / (1.0 + x) ** 2
        q = self.power
        t = self.t0 + s**q
        jac = q * s ** (q - 1.0) * ds
        return t, w * jac * self.density(t)

    @property
    def is_discrete(self) -> bool:
        return self.atoms is not None


def inv_sqrt() -> StieltjesFunction:
    """``f(z) = z**(-1/2)`` with ``w(t) = 1 / (pi sqrt(t))`` on ``(0, inf)``."""
    return StieltjesFunction(
        name="inv_sqrt",
        value=lambda z: np.power(z, -0.5),
        derivative=lambda z: -0.5 * np.power(z, -1.5),
        t0=0.0,
        density=lambda t: 1.0 / (np.pi * np.sqrt(t)),
        power=2.0,
    )


def inv_power(alpha: float) -> StieltjesFunction:
    """``f(z) = z**(-alpha)`` for ``0 < alpha < 1``.

    The density is ``sin(alpha pi) / (pi t**alpha)``.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    c = np.sin(alpha * np.pi) / np.pi
    return StieltjesFunction(
        name=f"inv_power_{alpha:g}",
        value=lambda z: np.power(z, -alpha),
        derivative=lambda z: -alpha * np.power(z, -alpha - 1.0),
        t0=0.0,
        density=lambda t: c * np.power(t, -alpha),
        power=_inv_power_exponent(alpha),
    )


def _inv_power_exponent(alpha: float) -> float:
    # q = k/(1-alpha) makes the integrand at s -> 0 behave like s**(k-1);
    # k >= 2(1-alpha)/alpha keeps it O((1+x)**1) at the far end x -> -1
    k = max(1, int(np.ceil(2.0 * (1.0 - alpha) / alpha - 1e-12)))
    return k / (1.0 - alpha)


def _log1p_over_z(z):
    z = np.asarray(z)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z / 2, np.log1p(zs) / zs)


def _log1p_over_z_prime(z):
    z = np.asarray(z)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 1.0, z)
    return np.where(small, -0.5 + 2.0 * z / 3.0, 1.0 / (zs * (1.0 + zs)) - np.log1p(zs) / zs**2)


def log1p_over_z() -> StieltjesFunction:
    """``f(z) = log(1 + z) / z`` with ``w(t) = 1/t`` on ``(1, inf)``."""
    return StieltjesFunction(
        name="log1p_over_z",
        value=_log1p_over_z,
        derivative=_log1p_over_z_prime,
        t0=1.0,
        density=lambda t: 1.0 / t,
        power=1.0,
    )


def point_mass(location: float, mass: float = 1.0) -> StieltjesFunction:
    """``f(z) = mass / (z + location)``, the measure being a single atom."""
    if location < 0 or mass <= 0:
        raise ValueError("need location >= 0 and mass > 0")
    return StieltjesFunction(
        name=f"resolvent_{location:g}",
        value=lambda z: mass / (np.asarray(z) + location),
        derivative=lambda z: -mass / (np.asarray(z) + location) ** 2,
        t0=float(location),
        atoms=((float(location), float(mass)),),
    )


def integrate_measure(
    f: StieltjesFunction,
    g: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-10,
    n_start: int = 16,
    max_nodes: int = MAX_NODES,
):
    """Integrate ``g`` against the measure of ``f``.

    Parameters
    ----------
    f : StieltjesFunction
        Supplies the measure.
    g : callable
        Vectorised integrand. Called with the 1-d node array ``t`` it must
        return an array whose first axis runs over the nodes; trailing axes
        are integrated componentwise.
    tol : float
        Relative tolerance on the largest component.
    n_start, max_nodes : int
        Initial and maximal number of Gauss-Legendre nodes. The node count
        doubles until two successive estimates agree.

    Returns
    -------
    float or ndarray

    Raises
    ------
    QuadratureError
        If the node cap is reached first.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if f.is_discrete:
        t, w = f.quadrature_rule(0)
        return np.tensordot(w, np.asarray(g(t)), axes=(0, 0))
    n = n_start
    prev = None
    while n <= max_nodes:
        t, w = f.quadrature_rule(n)
        est = np.tensordot(w, np.asarray(g(t)), axes=(0, 0))
        if prev is not None:
            scale = np.max(np.abs(est))
            diff = np.max(np.abs(est - prev))
            if diff <= tol * scale or (scale == 0.0 and diff == 0.0):
                return est
        prev = est
        n *= 2
    raise QuadratureError(f"no convergence to relative tolerance {tol:g} with {max_nodes} nodes")


def by_name(name: str) -> StieltjesFunction:
    """Look up a built-in function by its tag."""
    table = {"inv_sqrt": inv_sqrt, "log1p_over_z": log1p_over_z}
    if name in table:
        return table[name]()
    if name.startswith("inv_power_"):
        return inv_power(float(name[len("inv_power_"):]))
    raise KeyError(f"unknown function tag {name!r}")
