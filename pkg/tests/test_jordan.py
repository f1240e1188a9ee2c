import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nijhydro.calculus import conservation_law_residual, strong_symmetry_residual, symmetry_residual
from nijhydro.errors import DimensionMismatch, InsufficientJetOrder
from nijhydro.fields import (
    BlockSpec,
    Diagonal1,
    JordanToeplitz,
    make_toeplitz,
    operator_fd_defect,
    scalar_fd_defect,
    shift_matrix,
)
from nijhydro.jets import JetFunction, exponential, identity, polynomial, sine
from nijhydro.jordan import (
    compose_symmetry,
    h_of_U,
    h_of_U_field,
    jordan_conservation_law_field,
    jordan_symmetry,
    jordan_symmetry_field,
    toeplitz_from_symbol,
    u_symbol,
)
from nijhydro.linalg import commutant_coeffs, from_commutant_coeffs

coords = st.integers(2, 5).flatmap(lambda k: arrays(np.float64, k, elements=st.floats(0.2, 1.5)))


def poly_of_matrix(c, A):
    out = np.zeros_like(A)
    for a in reversed(c):
        out = out @ A + a * np.eye(A.shape[0])
    return out


def test_symbol_round_trip():
    u = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(toeplitz_from_symbol(u_symbol(u)), make_toeplitz(3).value(u))


@given(coords)
def test_polynomial_of_U(u):
    c = [0.5, -1.0, 2.0, 0.25]
    U = make_toeplitz(u.size).value(u)
    assert np.allclose(h_of_U(polynomial(c), u), poly_of_matrix(c, U), atol=1e-12)


@given(coords)
def test_exponential_of_U_matches_expm(u):
    U = make_toeplitz(u.size).value(u)
    assert np.allclose(h_of_U(exponential(1.0), u), scipy.linalg.expm(U), rtol=1e-12, atol=1e-12)


@given(coords)
def test_symbol_calculus_is_multiplicative(u):
    a, b = sine(1.0), exponential(-0.5)
    prod = JetFunction(lambda t: (t * 1.0).sin() * (t * -0.5).exp())
    assert np.allclose(h_of_U(a, u) @ h_of_U(b, u), h_of_U(prod, u), atol=1e-12)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_h_of_U_partials(k):
    assert operator_fd_defect(h_of_U_field(sine(0.8), k), np.linspace(0.4, 1.1, k)) < 1e-8


def test_insufficient_jet_order():
    short = lambda s, order=0: np.stack([np.asarray(s, float)] * 2, axis=-1)
    with pytest.raises(InsufficientJetOrder):
        h_of_U(short, np.array([1.0, 2.0, 3.0]))


@pytest.mark.parametrize("k", [2, 3, 4])
def test_jordan_symmetry_explicit_form(k):
    c = [[1.0, 0.5], [0.0, 1.0, -1.0], [2.0, 0.0, 0.0, 1.0], [0.3]][:k]
    u = np.linspace(0.5, 1.2, k)
    U = make_toeplitz(k).value(u)
    expect = sum(poly_of_matrix(ci, U) @ np.linalg.matrix_power(shift_matrix(k), k - i)
                 for i, ci in enumerate(c, start=1))
    assert np.allclose(jordan_symmetry([polynomial(ci) for ci in c], u), expect, atol=1e-12)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_jordan_symmetry_is_strong_symmetry(k):
    fs = [sine(1.1), exponential(0.4), polynomial([0.0, 1.0, 1.0]), identity()][:k]
    M = jordan_symmetry_field(fs)
    pts = np.random.default_rng(k).uniform(0.3, 1.3, (20, k))
    U = make_toeplitz(k)
    assert operator_fd_defect(M, pts[0]) < 1e-8
    assert symmetry_residual(U, M, pts) < 1e-9
    assert strong_symmetry_residual(U, M, pts) < 1e-9


@pytest.mark.parametrize("k", [2, 3, 4])
def test_corner_conservation_law(k):
    fs = [sine(1.1), exponential(0.4), polynomial([0.0, 1.0, 1.0]), identity()][:k]
    f = jordan_conservation_law_field(fs)
    p = np.linspace(0.4, 1.0, k)
    dv, dg = scalar_fd_defect(f, p)
    assert dv < 1e-7 and dg < 1e-6
    assert np.isclose(f.value(p), jordan_symmetry(fs, p)[0, k - 1])
    pts = np.random.default_rng(k).uniform(0.3, 1.3, (20, k))
    assert conservation_law_residual(make_toeplitz(k), f, pts) < 1e-9
    assert conservation_law_residual(jordan_symmetry_field(fs[::-1]), f, pts) < 1e-8


@given(coords)
def test_round_trip_through_commutant(u):
    k = u.size
    fs = [sine(1.1), exponential(0.4), polynomial([0.0, 1.0, 1.0]), identity(), exponential(-1.0)][:k]
    M = jordan_symmetry(fs, u)
    U = make_toeplitz(k).value(u)
    assert np.max(np.abs(from_commutant_coeffs(U, commutant_coeffs(U, M)) - M)) < 1e-8


def test_compose_symmetry_blocks_and_checks():
    spec = BlockSpec([JordanToeplitz(2), Diagonal1(identity())])
    M = compose_symmetry(spec, [[identity(), exponential(1.0)], [sine(1.0)]])
    u = np.array([0.3, 0.8, 1.7])
    Mv = M.value(u)
    assert np.allclose(Mv[:2, :2], jordan_symmetry([identity(), exponential(1.0)], u[:2]))
    assert Mv[2, 2] == pytest.approx(np.sin(1.7))
    assert np.allclose(Mv[:2, 2], 0) and np.allclose(Mv[2, :2], 0)
    assert operator_fd_defect(M, u) < 1e-8
    with pytest.raises(DimensionMismatch):
        compose_symmetry(spec, [[identity()], [sine(1.0)]])
    with pytest.raises(DimensionMismatch):
        compose_symmetry(spec, [[identity(), identity()]])


def test_compose_symmetry_warns_on_shared_eigenvalue():
    spec = BlockSpec([Diagonal1(identity()), Diagonal1(identity())])
    M = compose_symmetry(spec, [[identity()], [sine(1.0)]])
    with pytest.warns(RuntimeWarning):
        M.value(np.array([1.0, 1.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        M.value(np.array([1.0, 2.0]))
