import numpy as np
import pytest
from hypothesis import settings

from stieltjes_krylov import SpectralBounds, inv_sqrt, make_diagonal_chebyshev

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

TABLE2_BOUNDS = SpectralBounds(0.1, 200.1)


@pytest.fixture(scope="session")
def table2():
    """The N=1000 Chebyshev instance with f = z^{-1/2} and normalised ones."""
    op = make_diagonal_chebyshev(1000, TABLE2_BOUNDS)
    f = inv_sqrt()
    b = np.ones(1000) / np.sqrt(1000)
    ref = op.exact_function_apply(f, b)
    return op, f, b, ref


def dense_spd(n, lo, hi, seed):
    """Random dense symmetric matrix with spectrum spread over [lo, hi]."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.sort(np.concatenate([[lo, hi], rng.uniform(lo, hi, n - 2)]))
    return (Q * lam) @ Q.T, lam


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = []
    for mod in list(sys.modules.values()):
        lines.extend(getattr(mod, "ACCEPTANCE_RESULTS", []) or [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
