import numpy as np
import pytest
from hypothesis import given, strategies as st

from stieltjes_krylov import (
    ConvergenceError,
    DiagonalOperator,
    InnerSolveConfig,
    MatrixOperator,
    SpectralBounds,
    extended_krylov_fAb,
    inner_tolerance_schedule,
    inv_sqrt,
    log1p_over_z,
    optimal_shift,
    si_lanczos_fAb,
)
from stieltjes_krylov._factors import cg_factor
from stieltjes_krylov.rational import (
    cg_solve,
    em_norm_bound,
    hessenberg_function_e1,
    si_error_bound,
    transformed_g,
)

from conftest import TABLE2_BOUNDS, dense_spd


def test_optimal_shift():
    assert optimal_shift(TABLE2_BOUNDS) == pytest.approx(-np.sqrt(0.1 * 200.1), rel=1e-15)


def test_transformed_function_domain_and_integral():
    f = log1p_over_z()
    xi = -2.0
    g = transformed_g(f, xi)
    assert g.y_max == pytest.approx(0.5)
    for y in (0.01, 0.2, 0.5):
        assert g(y) == pytest.approx(f(1.0 / y + xi), rel=1e-14)
        assert g.integral(y) == pytest.approx(g(y), rel=1e-9)
    with pytest.raises(ValueError):
        g(0.6)
    with pytest.raises(ValueError):
        g(0.0)
    with pytest.raises(ValueError):
        transformed_g(f, 1.0)


def test_cg_solve():
    A, _ = dense_spd(30, 1.0, 50.0, seed=0)
    b = np.random.default_rng(0).standard_normal(30)
    x, r, k = cg_solve(MatrixOperator(A), b, 1e-10, shift=-2.0)
    np.testing.assert_allclose(x, np.linalg.solve(A + 2 * np.eye(30), b), rtol=1e-8)
    assert np.linalg.norm(r) <= 1e-10
    assert 0 < k <= 30 + 5
    with pytest.raises(ConvergenceError):
        cg_solve(MatrixOperator(A), b, 1e-14, maxiter=2)


def test_inner_schedule():
    f = inv_sqrt()
    xi = optimal_shift(TABLE2_BOUNDS)
    s = inner_tolerance_schedule(1e-6, f, TABLE2_BOUNDS, xi)
    a0 = cg_factor(np.sqrt(TABLE2_BOUNDS.kappa))
    assert s.ratio == pytest.approx(1.0 / a0)
    P = (0.1 - xi) * abs(f.derivative(0.1)) + (200.1 - xi) * abs(f.derivative(-xi))
    assert s.eps1 == pytest.approx(1e-6 / (2 * P), rel=1e-12)
    assert s.tolerance(3) == pytest.approx(s.eps1 / a0**2)
    strict = inner_tolerance_schedule(1e-6, f, TABLE2_BOUNDS, xi, strict=True, max_outer=100)
    assert strict.ratio == 1.0 and strict.eps1 == pytest.approx(s.eps1 / 10)
    with pytest.raises(ValueError):
        InnerSolveConfig(eps1=1e-8, ratio=0.5)
    with pytest.raises(ValueError):
        inner_tolerance_schedule(0.0, f, TABLE2_BOUNDS, xi)


@given(st.lists(st.floats(0, 1e-3), min_size=1, max_size=30), st.floats(1e-3, 10))
def test_em_bound_closed_form_and_monotone(res, nB):
    running = [em_norm_bound(res[:j], nB) for j in range(1, len(res) + 1)]
    assert np.all(np.diff(running) >= 0)
    assert running[-1] == pytest.approx(nB * np.sqrt(np.sum(np.square(res))), rel=1e-12, abs=1e-300)


def test_em_bound_rejects_negative():
    with pytest.raises(ValueError):
        em_norm_bound([1e-3, -1e-3], 1.0)


def test_hessenberg_function_nonsymmetric():
    rng = np.random.default_rng(3)
    f = inv_sqrt()
    g = transformed_g(f, -1.0)
    # small nonsymmetric perturbation of an SPD matrix with spectrum in (0, 1)
    A, _ = dense_spd(8, 0.1, 0.9, seed=3)
    H = A + 1e-3 * np.triu(rng.standard_normal((8, 8)))
    lam, X = np.linalg.eig(H)
    dense = np.real(X @ np.diag(g.unchecked(lam)) @ np.linalg.inv(X))[:, 0]
    np.testing.assert_allclose(hessenberg_function_e1(H, g), dense, rtol=1e-10, atol=1e-12)


def test_si_exact_matches_dense_and_bound():
    A, lam = dense_spd(50, 0.2, 60.0, seed=5)
    op = MatrixOperator(A)
    bd = SpectralBounds(0.2, 60.0)
    f = inv_sqrt()
    b = np.random.default_rng(5).standard_normal(50)
    ref = op.exact_function_apply(f, b)
    x, rep = si_lanczos_fAb(op, f, b, 1e-9, bd, inner=InnerSolveConfig.exact_solves(),
                            stopping="oracle", reference=ref, record_history=True)
    assert rep.relative_error <= 1e-9
    nref = np.linalg.norm(ref)
    for m, e in enumerate(rep.extra["errors"], start=1):
        assert e * nref <= si_error_bound(bd, f, m, np.linalg.norm(b))


def test_si_standard_and_corrected_both_converge(table2):
    op, f, b, ref = table2
    for corrected in (True, False):
        x, rep = si_lanczos_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, corrected=corrected,
                                stopping="oracle", reference=ref)
        assert rep.relative_error <= 1e-6


def test_si_practical_stopping(table2):
    op, f, b, ref = table2
    x, rep = si_lanczos_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, reference=ref)
    assert rep.converged and rep.relative_error <= 1e-6
    inner = rep.extra["inner_iterations"]
    assert rep.matvecs == sum(inner)
    # relaxed tolerances make later solves cheaper
    assert inner[-1] < inner[0]
    assert np.all(np.diff(rep.extra["em_bounds"]) >= 0)


def test_eksm_practical_and_oracle(table2):
    op, f, b, ref = table2
    x, rep = extended_krylov_fAb(op, f, b, 1e-6, bounds=TABLE2_BOUNDS, reference=ref)
    assert rep.converged and rep.relative_error <= 1e-6
    x, rep = extended_krylov_fAb(op, f, b, 1e-6, bounds=TABLE2_BOUNDS, stopping="oracle", reference=ref)
    assert rep.relative_error <= 1e-6
    assert rep.matvecs == rep.inner_matvecs + rep.iterations + 1


def test_small_space_exhaustion():
    op = DiagonalOperator(np.array([1.0, 2.0, 3.0]))
    f = inv_sqrt()
    b = np.ones(3)
    x, rep = extended_krylov_fAb(op, f, b, 1e-14, inner=InnerSolveConfig.exact_solves())
    np.testing.assert_allclose(x, op.exact_function_apply(f, b), rtol=1e-12)


def test_invalid_arguments(table2):
    op, f, b, ref = table2
    with pytest.raises(ValueError):
        si_lanczos_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, stopping="oracle")
    with pytest.raises(ValueError):
        extended_krylov_fAb(op, f, b, 1e-6)
    with pytest.raises(ValueError):
        extended_krylov_fAb(op, f, b, 1e-6, bounds=TABLE2_BOUNDS, stopping="other")


def test_si_cap_raises(table2):
    op, f, b, ref = table2
    with pytest.raises(ConvergenceError) as info:
        si_lanczos_fAb(op, f, b, 1e-12, TABLE2_BOUNDS, m_max=3)
    assert info.value.report.iterations == 3
