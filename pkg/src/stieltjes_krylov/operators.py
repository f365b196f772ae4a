"""Hermitian positive definite operators with matvec counting.

All solvers in the package touch ``A`` only through :func:`apply`, so the
counter on the operator is the single source of truth for matvec costs.
Diagonal test operators also carry their spectrum, which gives exact
reference values of ``f(A) b`` for free.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SpectralBounds:
    """Enclosing interval ``[lambda_min, lambda_max]`` of a positive spectrum."""

    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        if not (self.lambda_min > 0):
            raise ValueError(f"lambda_min must be positive, got {self.lambda_min}")
        if self.lambda_max < self.lambda_min:
            raise ValueError("lambda_max must not be smaller than lambda_min")

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min

    @property
    def geometric_mean(self) -> float:
        return float(np.sqrt(self.lambda_min * self.lambda_max))


class LinearOperator:
    """Hermitian operator given by a matvec callable.

    Parameters
    ----------
    n : int
        Dimension.
    matvec : callable
        Function ``v -> A v`` on 1-d arrays of length ``n``.
    spectrum : array_like, optional
        Known eigenvalues. Stored sorted ascending.
    """

    def __init__(self, n: int, matvec: Callable[[np.ndarray], np.ndarray], spectrum=None):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.n = int(n)
        self._matvec = matvec
        self._count = 0
        self._lock = threading.Lock()
        self.spectrum = None if spectrum is None else np.sort(np.asarray(spectrum, dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def matvec_count(self) -> int:
        return self._count

    def reset_count(self) -> None:
        with self._lock:
            self._count = 0

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v)
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {v.shape}")
        out = self._matvec(v)
        with self._lock:
            self._count += 1
        return out

    def bounds(self) -> SpectralBounds:
        """Spectral bounds read off the stored spectrum."""
        if self.spectrum is None:
            raise ValueError("operator does not carry its spectrum")
        return SpectralBounds(float(self.spectrum[0]), float(self.spectrum[-1]))

    def solve_shifted(self, v, shift: float = 0.0) -> np.ndarray:
        """Exact solve of ``(A - shift I) x = v``; not counted as matvecs."""
        raise NotImplementedError("exact solves need a diagonal or dense operator")

    def exact_function_apply(self, f, b) -> np.ndarray:
        """Reference value of ``f(A) b``."""
        raise NotImplementedError("exact f(A)b needs a diagonal or dense operator")


class DiagonalOperator(LinearOperator):
    """``A = diag(d)`` with positive ``d``."""

    def __init__(self, diagonal):
        d = np.asarray(diagonal, dtype=float)
        if d.ndim != 1:
            raise ValueError("diagonal must be 1-d")
        self.diagonal = d
        super().__init__(d.size, lambda v: d * v, spectrum=d)

    def solve_shifted(self, v, shift: float = 0.0) -> np.ndarray:
        return np.asarray(v) / (self.diagonal - shift)

    def exact_function_apply(self, f, b) -> np.ndarray:
        return f(self.diagonal) * np.asarray(b)


class MatrixOperator(LinearOperator):
    """Dense or scipy-sparse Hermitian matrix.

    The spectrum is computed eagerly for dense matrices of moderate size so
    that small instances can serve as their own oracles.
    """

    def __init__(self, matrix, compute_spectrum: bool | None = None):
        self.matrix = matrix
        n = matrix.shape[0]
        dense = isinstance(matrix, np.ndarray)
        if compute_spectrum is None:
            compute_spectrum = dense and n <= 2000
        self._eig = None
        spectrum = None
        if compute_spectrum:
            lam, Q = np.linalg.eigh(np.asarray(matrix))
            self._eig = (lam, Q)
            spectrum = lam
        super().__init__(n, lambda v: matrix @ v, spectrum=spectrum)

    def _require_eig(self):
        if self._eig is None:
            raise NotImplementedError("eigendecomposition was not computed")
        return self._eig

    def solve_shifted(self, v, shift: float = 0.0) -> np.ndarray:
        lam, Q = self._require_eig()
        return Q @ ((Q.conj().T @ v) / (lam - shift))

    def exact_function_apply(self, f, b) -> np.ndarray:
        lam, Q = self._require_eig()
        return Q @ (f(lam) * (Q.conj().T @ b))


def apply(op: LinearOperator, v) -> np.ndarray:
    """Return ``A v`` and increment the operator's matvec counter."""
    return op.apply(v)


def chebyshev_nodes(n: int, bounds: SpectralBounds) -> np.ndarray:
    """First-kind Chebyshev points mapped to the bounds, ascending."""
    if n < 1:
        raise ValueError("n must be at least 1")
    j = np.arange(1, n + 1)
    x = np.cos((2 * j - 1) * np.pi / (2 * n))
    lo, hi = bounds.lambda_min, bounds.lambda_max
    return np.sort(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)


def make_diagonal_chebyshev(n: int, bounds: SpectralBounds) -> DiagonalOperator:
    """Diagonal operator with Chebyshev eigenvalues in ``bounds``."""
    return DiagonalOperator(chebyshev_nodes(n, bounds))


def clustered_eigenvalues(n: int, bounds: SpectralBounds, gamma: float) -> np.ndarray:
    """Eigenvalues clustering toward ``lambda_min`` as ``gamma`` decreases.

    Interior values follow
    ``lambda_j = lmin + (j-1)/(n-1) * (lmax - lmin) * gamma**(n-j)``;
    the end points are pinned to the bounds.
    """
    if not (0 < gamma <= 1):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if n < 2:
        raise ValueError("n must be at least 2")
    lo, hi = bounds.lambda_min, bounds.lambda_max
    j = np.arange(1, n + 1, dtype=float)
    lam = lo + (j - 1) / (n - 1) * (hi - lo) * gamma ** (n - j)
    lam[0], lam[-1] = lo, hi
    return np.sort(lam)


def make_diagonal_clustered(n: int, bounds: SpectralBounds, gamma: float) -> DiagonalOperator:
    """Diagonal operator with the clustered eigenvalue distribution."""
    return DiagonalOperator(clustered_eigenvalues(n, bounds, gamma))
