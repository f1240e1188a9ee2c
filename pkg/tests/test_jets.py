import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nijhydro.jets import (
    Dual2,
    Jet1D,
    JetFunction,
    exponential,
    identity,
    jet_shift,
    polynomial,
    series_compose,
    series_mul,
    sine,
)

finite = st.floats(-2.0, 2.0, allow_nan=False)


def test_variable_has_unit_derivative():
    j = Jet1D.variable(1.5, 3)
    assert np.allclose(j.derivatives(), [1.5, 1.0, 0.0, 0.0])


def test_series_mul_matches_polynomial_product():
    a = np.array([1.0, 2.0, 3.0, 0.0])
    b = np.array([0.5, -1.0, 0.0, 4.0])
    full = np.polynomial.polynomial.polymul(a, b)[:4]
    assert np.allclose(series_mul(a, b), full)


def test_series_compose_exp_of_sin():
    # exp(sin t) = 1 + t + t^2/2 + 0 t^3 - t^4/8 ...
    inner = np.array([0.0, 1.0, 0.0, -1.0 / 6, 0.0])
    outer = np.array([1.0 / math.factorial(k) for k in range(5)])
    assert np.allclose(series_compose(outer, inner), [1, 1, 0.5, 0, -1.0 / 8])


@given(finite, st.integers(1, 5))
def test_exp_jet_derivatives(s, m):
    d = exponential(0.7)(s, m)
    assert np.allclose(d, [0.7 ** k * math.exp(0.7 * s) for k in range(m + 1)], rtol=1e-12)


@given(finite)
def test_quotient_rule(s):
    f = JetFunction(lambda t: t.sin() / (t * t + 1.0))
    d = f(s, 1)
    exact = (math.cos(s) * (s * s + 1) - 2 * s * math.sin(s)) / (s * s + 1) ** 2
    assert d[0] == pytest.approx(math.sin(s) / (s * s + 1), abs=1e-14)
    assert d[1] == pytest.approx(exact, abs=1e-12)


@given(st.floats(0.2, 3.0))
def test_log_sqrt_pow_against_finite_differences(s):
    f = JetFunction(lambda t: t.log() * t.sqrt() + t ** 3)
    d = f(s, 2)
    g = lambda x: math.log(x) * math.sqrt(x) + x ** 3
    h = 1e-4
    assert d[1] == pytest.approx((g(s + h) - g(s - h)) / (2 * h), rel=1e-6, abs=1e-7)
    assert d[2] == pytest.approx((g(s + h) - 2 * g(s) + g(s - h)) / h ** 2, rel=1e-4, abs=1e-4)


def test_polynomial_and_shift():
    p = polynomial([1.0, 2.0, 3.0])  # 1 + 2s + 3s^2
    assert np.allclose(p(2.0, 3), [17.0, 14.0, 6.0, 0.0])
    assert np.allclose(jet_shift(p)(2.0, 1), [14.0, 6.0])


def test_vectorised_evaluation():
    s = np.linspace(0, 1, 7)
    d = sine(2.0)(s, 2)
    assert d.shape == (7, 3)
    assert np.allclose(d[:, 2], -4 * np.sin(2 * s))


def test_identity_jet_function():
    assert np.allclose(identity()(0.3, 2), [0.3, 1.0, 0.0])


@given(finite, finite)
def test_dual2_gradient_and_hessian(a, b):
    x, y = Dual2.variables(np.array([a, b]))
    f = x * x * y + (x * y).sin()
    gx = 2 * a * b + b * math.cos(a * b)
    gy = a * a + a * math.cos(a * b)
    hxy = 2 * a + math.cos(a * b) - a * b * math.sin(a * b)
    assert np.allclose(f.grad, [gx, gy], atol=1e-12)
    assert f.hess[0, 1] == pytest.approx(hxy, abs=1e-12)
    assert f.hess[1, 0] == pytest.approx(hxy, abs=1e-12)


def test_dual2_division_and_exp():
    x, y = Dual2.variables(np.array([1.0, 2.0]))
    f = (x / y).exp()
    e = math.exp(0.5)
    assert f.val == pytest.approx(e)
    assert np.allclose(f.grad, [e / 2, -e / 4])
    assert f.hess[1, 1] == pytest.approx(e * (1 / 16 + 2 / 8))
