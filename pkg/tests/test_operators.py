import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stieltjes_krylov import (
    DiagonalOperator,
    LinearOperator,
    MatrixOperator,
    SpectralBounds,
    apply,
    make_diagonal_chebyshev,
    make_diagonal_clustered,
)
from stieltjes_krylov.operators import chebyshev_nodes, clustered_eigenvalues


def test_identity_apply_counts():
    op = LinearOperator(3, lambda v: v)
    out = apply(op, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(out, [1, 2, 3])
    assert op.matvec_count == 1


def test_diagonal_action():
    op = DiagonalOperator([2.0, 3.0])
    np.testing.assert_array_equal(apply(op, np.ones(2)), [2, 3])


def test_dimension_mismatch():
    op = DiagonalOperator([2.0, 3.0])
    with pytest.raises(ValueError):
        op.apply(np.ones(3))
    assert op.matvec_count == 0


def test_chebyshev_single_node_is_midpoint():
    op = make_diagonal_chebyshev(1, SpectralBounds(0.1, 200.1))
    assert op.spectrum[0] == pytest.approx(100.1, rel=1e-15)


def test_chebyshev_e1():
    op = make_diagonal_chebyshev(10, SpectralBounds(1.0, 3.0))
    e1 = np.zeros(10)
    e1[0] = 1.0
    lam1 = 2.0 + np.cos(19 * np.pi / 20)  # smallest node
    np.testing.assert_allclose(op.apply(e1), lam1 * e1, rtol=1e-15)


def test_chebyshev_table2_range():
    lam = chebyshev_nodes(1000, SpectralBounds(0.1, 200.1))
    assert lam.min() >= 0.1 and lam.max() <= 200.1
    assert np.all(np.diff(lam) > 0)


def test_chebyshev_two_nodes_symmetric():
    lam = chebyshev_nodes(2, SpectralBounds(0.0 + 1e-9, 2.0))
    assert lam[0] + lam[1] == pytest.approx(2.0 + 1e-9)


def test_clustered_gamma_one_equispaced():
    lam = clustered_eigenvalues(11, SpectralBounds(1.0, 2.0), 1.0)
    np.testing.assert_allclose(lam, np.linspace(1, 2, 11), rtol=1e-15)


def test_clustered_second_value():
    lam = clustered_eigenvalues(1000, SpectralBounds(0.1, 200.1), 0.9)
    assert lam[1] == pytest.approx(0.1 + 200.0 / 999 * 0.9**998, rel=1e-12)


@given(st.floats(0.01, 0.999))
def test_clustered_within_bounds(gamma):
    op = make_diagonal_clustered(200, SpectralBounds(0.1, 200.1), gamma)
    assert op.spectrum[0] == 0.1 and op.spectrum[-1] == 200.1
    assert np.all(np.diff(op.spectrum) >= 0)


@pytest.mark.parametrize("gamma", [0.0, -0.5, 1.5])
def test_clustered_gamma_range(gamma):
    with pytest.raises(ValueError):
        make_diagonal_clustered(10, SpectralBounds(1, 2), gamma)


def test_bounds_validation():
    with pytest.raises(ValueError):
        SpectralBounds(0.0, 1.0)
    with pytest.raises(ValueError):
        SpectralBounds(2.0, 1.0)
    assert SpectralBounds(0.1, 200.1).kappa == pytest.approx(2001)


def test_spectrum_agrees_with_bounds():
    b = SpectralBounds(0.1, 200.1)
    op = make_diagonal_chebyshev(50, b)
    got = op.bounds()
    assert abs(got.lambda_min - op.spectrum.min()) <= 1e-14 * got.lambda_min
    assert abs(got.lambda_max - op.spectrum.max()) <= 1e-14 * got.lambda_max


@given(st.integers(0, 2**31))
def test_matrix_operator_hermitian(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((8, 8))
    op = MatrixOperator(M @ M.T + 8 * np.eye(8))
    u, v = rng.standard_normal(8), rng.standard_normal(8)
    scale = np.linalg.norm(op.matrix, 2) * np.linalg.norm(u) * np.linalg.norm(v)
    assert abs(u @ op.apply(v) - op.apply(u) @ v) <= 1e-12 * scale


def test_counter_threadsafe():
    op = DiagonalOperator(np.arange(1.0, 5.0))
    v = np.ones(4)

    def work():
        for _ in range(500):
            op.apply(v)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert op.matvec_count == 4000


def test_exact_function_apply_dense_matches_diagonal():
    lam = np.array([0.5, 1.0, 4.0])
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))
    op = MatrixOperator((Q * lam) @ Q.T)
    b = np.array([1.0, -2.0, 0.5])
    got = op.exact_function_apply(lambda z: z**-0.5, b)
    np.testing.assert_allclose(got, Q @ ((Q.T @ b) / np.sqrt(lam)), rtol=1e-12)
