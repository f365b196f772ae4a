import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from stieltjes_krylov import QuadratureError, integrate_measure, inv_power, inv_sqrt, log1p_over_z, point_mass
from stieltjes_krylov.stieltjes import by_name

BUILTINS = [inv_sqrt(), log1p_over_z(), inv_power(0.1), inv_power(0.3), inv_power(0.75)]


def test_inv_sqrt_values():
    f = inv_sqrt()
    assert f(4.0) == 0.5
    assert f.derivative(1.0) == -0.5
    assert f.t0 == 0.0


def test_inv_sqrt_measure_at_one_scipy_oracle():
    # independent route: scipy's QUADPACK on the raw density
    val, _ = quad(lambda t: 1.0 / (np.pi * np.sqrt(t) * (t + 1.0)), 0, np.inf, limit=200)
    assert val == pytest.approx(1.0, rel=1e-9)
    assert integrate_measure(inv_sqrt(), lambda t: 1.0 / (t + 1.0)) == pytest.approx(1.0, rel=1e-10)


def test_log1p_values():
    f = log1p_over_z()
    assert f(1.0) == pytest.approx(np.log(2.0), rel=1e-15)
    assert f.t0 == 1.0
    oracle, _ = quad(lambda t: 1.0 / (t * (t + 3.0)), 1, np.inf)
    assert abs(f(3.0) - oracle) < 1e-10
    assert abs(integrate_measure(f, lambda t: 1.0 / (t + 3.0)) - oracle) < 1e-10


def test_log1p_small_argument_branch():
    f = log1p_over_z()
    z = np.array([1e-12, 1e-6, 1e-3])
    np.testing.assert_allclose(f(z), np.log1p(z) / z, rtol=1e-12)
    np.testing.assert_allclose(f.derivative(1e-9), -0.5, rtol=1e-6)


def test_integrate_examples():
    f = inv_sqrt()
    assert integrate_measure(f, lambda t: 1.0 / (t + 4.0)) == pytest.approx(0.5, rel=1e-10)
    assert integrate_measure(f, lambda t: 1.0 / (t + 1.0) ** 2) == pytest.approx(0.5, rel=1e-10)
    assert integrate_measure(f, lambda t: np.zeros_like(t)) == 0.0


def test_integrate_vector_valued():
    f = inv_sqrt()
    z = np.array([0.5, 2.0, 8.0])
    got = integrate_measure(f, lambda t: 1.0 / (t[:, None] + z[None, :]))
    np.testing.assert_allclose(got, z**-0.5, rtol=1e-10)


def test_integrate_failure_is_explicit():
    # nonintegrable against the measure: int dt / sqrt(t) diverges
    with pytest.raises(QuadratureError):
        integrate_measure(inv_sqrt(), lambda t: np.ones_like(t), tol=1e-12)


def test_integrate_rejects_bad_tol():
    with pytest.raises(ValueError):
        integrate_measure(inv_sqrt(), lambda t: 1.0 / (t + 1), tol=0.0)


@pytest.mark.parametrize("f", BUILTINS, ids=lambda f: f.name)
def test_measure_reproduces_function(f):
    for z in np.logspace(-3, 3, 20):
        got = integrate_measure(f, lambda t: 1.0 / (t + z), tol=1e-10)
        assert got == pytest.approx(f(z), rel=1e-9)


@pytest.mark.parametrize("f", BUILTINS, ids=lambda f: f.name)
@given(z=st.floats(1e-2, 1e2))
def test_complete_monotonicity_and_derivative(f, z):
    assert f(z) > 0 and f.derivative(z) < 0
    h = 1e-5 * z
    fd = (f(z + h) - f(z - h)) / (2 * h)
    assert f.derivative(z) == pytest.approx(fd, rel=1e-6)


def test_point_mass_is_exact():
    f = point_mass(2.0, 3.0)
    assert f(1.0) == pytest.approx(1.0)
    assert integrate_measure(f, lambda t: t**2) == pytest.approx(12.0)
    assert f.is_discrete


def test_inv_power_range():
    with pytest.raises(ValueError):
        inv_power(1.0)


def test_by_name():
    assert by_name("inv_sqrt")(4.0) == 0.5
    assert by_name("inv_power_0.25")(16.0) == pytest.approx(0.5)
    with pytest.raises(KeyError):
        by_name("exp")
