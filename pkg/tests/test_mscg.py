import numpy as np
import pytest
from hypothesis import given, strategies as st

from stieltjes_krylov import (
    ConvergenceError,
    DiagonalOperator,
    KrylovError,
    MatrixOperator,
    SpectralBounds,
    SpectrumError,
    log1p_over_z,
    min_poles_for_tolerance,
    mscg_fAb,
    multishift_cg,
    point_mass,
    rational_approximation,
    zolotarev_inv_sqrt,
)
from stieltjes_krylov.mscg import sampled_error
from stieltjes_krylov.rational import cg_solve

from conftest import TABLE2_BOUNDS, dense_spd


@pytest.mark.parametrize("p", [1, 4, 9, 15])
def test_zolotarev_reported_error_matches_sampling(p):
    r = zolotarev_inv_sqrt(TABLE2_BOUNDS, p)
    assert np.all(r.poles < 0) and np.all(np.diff(np.abs(r.poles)) > 0)
    assert np.all(r.weights > 0)
    sampled = sampled_error(lambda z: z**-0.5, r, n=20_000)
    assert sampled <= r.delta * (1 + 1e-8)
    # equioscillation: the sampled maximum is essentially attained
    assert sampled >= 0.99 * r.delta


def test_zolotarev_values():
    assert zolotarev_inv_sqrt(TABLE2_BOUNDS, 9).delta == pytest.approx(4.62e-7, rel=0.01)
    assert zolotarev_inv_sqrt(TABLE2_BOUNDS, 8).delta > 5e-7


def test_zolotarev_large_p_is_finite():
    r = zolotarev_inv_sqrt(TABLE2_BOUNDS, 40)
    assert np.all(np.isfinite(r.weights))
    assert r.relative_delta < 1e-13


def test_min_poles_self_consistent():
    for target in (1e-3, 5e-7, 1e-10):
        p = min_poles_for_tolerance(TABLE2_BOUNDS, "inv_sqrt", target)
        assert zolotarev_inv_sqrt(TABLE2_BOUNDS, p).delta <= target
        if p > 1:
            assert zolotarev_inv_sqrt(TABLE2_BOUNDS, p - 1).delta > target


@given(st.floats(1e-11, 1e-1))
def test_min_poles_monotone(delta):
    p1 = min_poles_for_tolerance(TABLE2_BOUNDS, "inv_sqrt", delta)
    p2 = min_poles_for_tolerance(TABLE2_BOUNDS, "inv_sqrt", delta / 2)
    assert p2 >= p1


def test_min_poles_floor_and_errors():
    with pytest.raises(KrylovError):
        min_poles_for_tolerance(TABLE2_BOUNDS, "inv_sqrt", 1e-20)
    with pytest.raises(ValueError):
        min_poles_for_tolerance(TABLE2_BOUNDS, "inv_sqrt", 0.0)
    with pytest.raises(ValueError):
        min_poles_for_tolerance(TABLE2_BOUNDS, "log1p_over_z", 1e-6)
    with pytest.raises(ValueError):
        rational_approximation(log1p_over_z(), TABLE2_BOUNDS, 1e-6)


def test_discrete_measure_is_exact_rational():
    f = point_mass(4.0, 2.0)
    r = rational_approximation(f, TABLE2_BOUNDS, 1e-9)
    z = np.linspace(0.1, 200, 7)
    np.testing.assert_allclose(r(z), f(z), rtol=1e-14)


def test_single_shift_equals_plain_cg():
    A, _ = dense_spd(50, 0.5, 40.0, seed=1)
    op = MatrixOperator(A)
    b = np.random.default_rng(1).standard_normal(50)
    xs, rep = multishift_cg(op, b, [0.0], 1e-10)
    x_cg, _, k = cg_solve(MatrixOperator(A), b, 1e-10)
    assert rep.iterations == k
    np.testing.assert_allclose(xs[0], x_cg, rtol=1e-9, atol=1e-12)


def test_shifted_solutions_match_diagonal_oracle():
    rng = np.random.default_rng(2)
    lam = np.sort(rng.uniform(0.1, 50.0, 300))
    op = DiagonalOperator(lam)
    b = rng.standard_normal(300)
    shifts = np.array([-0.05, -1.0, -10.0, -500.0])
    xs, rep = multishift_cg(op, b, shifts, 1e-11)
    for x, z, res in zip(xs, shifts, rep.extra["residuals"]):
        exact = b / (lam - z)
        assert np.linalg.norm((lam - z) * x - b) <= 1.01e-11 + 1e-13
        assert np.linalg.norm(x - exact) <= 1e-11 / (lam[0] - z) * 1.01
    # the seed is the largest shift and runs longest
    assert rep.extra["seed"] == 0
    assert max(rep.extra["converged_at"]) == rep.extra["converged_at"][0] == rep.iterations


def test_residuals_are_collinear():
    rng = np.random.default_rng(3)
    lam = np.sort(rng.uniform(0.1, 10.0, 50))
    op = DiagonalOperator(lam)
    b = rng.standard_normal(50)
    shifts = [-0.1, -1.0, -3.0]
    # stop after 6 steps through the monitor and compare the true residuals
    seen = {}

    def monitor(k, cur):
        if k == 6:
            seen["xs"] = cur.copy()
            return True
        return False

    multishift_cg(op, b, shifts, 1e-14, monitor=monitor)
    R = np.array([b - (lam - z) * x for z, x in zip(shifts, seen["xs"])])
    s = np.linalg.svd(R, compute_uv=False)
    assert s[1] <= 1e-8 * s[0]


def test_point_mass_gives_shifted_solve():
    # f(z) = 1/(z + 1) is a single atom at t = 1
    A, _ = dense_spd(40, 0.5, 20.0, seed=4)
    op = MatrixOperator(A)
    b = np.random.default_rng(4).standard_normal(40)
    x, rep = mscg_fAb(op, point_mass(1.0, 1.0), b, 1e-10, SpectralBounds(0.5, 20.0))
    np.testing.assert_allclose(x, np.linalg.solve(A + np.eye(40), b), rtol=1e-8)
    assert rep.extra["p"] == 1


def test_single_vector_variant_matches(table2):
    op, f, b, ref = table2
    x1, r1 = mscg_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, p=15)
    x2, r2 = mscg_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, p=15, single_vector=True)
    assert r1.matvecs == r2.matvecs
    np.testing.assert_allclose(x1, x2, rtol=1e-10, atol=1e-14)


def test_practical_stopping_meets_tolerance(table2):
    op, f, b, ref = table2
    x, rep = mscg_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, reference=ref)
    assert rep.relative_error <= 1e-6
    assert rep.matvecs == rep.iterations


def test_table2_oracle_count(table2):
    op, f, b, ref = table2
    x, rep = mscg_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, p=15, reference=ref, stopping="oracle")
    assert rep.relative_error <= 1e-6
    assert abs(rep.matvecs - 240) <= 0.15 * 240
    # converged systems drop out: live counts never increase
    assert np.all(np.diff(rep.extra["active"]) <= 0)


def test_negative_curvature_raises():
    op = DiagonalOperator(np.linspace(1.0, 5.0, 20))
    with pytest.raises(SpectrumError):
        multishift_cg(op, np.ones(20), [2.0], 1e-10)


def test_iteration_cap():
    op = DiagonalOperator(np.linspace(0.01, 100.0, 200))
    with pytest.raises(ConvergenceError) as info:
        multishift_cg(op, np.ones(200), [0.0, -1.0], 1e-14, maxiter=5)
    assert info.value.report.iterations == 5
    assert len(info.value.result) == 2


def test_invalid_arguments(table2):
    op, f, b, ref = table2
    with pytest.raises(ValueError):
        mscg_fAb(op, f, b, 0.0, TABLE2_BOUNDS)
    with pytest.raises(ValueError):
        mscg_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, stopping="oracle")
    with pytest.raises(ValueError):
        mscg_fAb(op, f, b, 1e-6, TABLE2_BOUNDS, stopping="bogus")
