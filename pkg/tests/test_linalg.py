import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nijhydro.errors import CayleyHamiltonViolated, DoesNotCommute, NotGlRegular
from nijhydro.linalg import (
    a_sequence,
    adjugate_identity_residual,
    char_poly_eval,
    char_poly_sigma,
    commutant_coeffs,
    cyclic_vector,
    from_commutant_coeffs,
    is_cyclic,
    is_gl_regular,
    krylov,
)

entries = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


def square(n):
    return arrays(np.float64, (n, n), elements=entries)


def test_sigma_of_diag():
    assert np.allclose(char_poly_sigma(np.diag([1.0, 2.0])), [3.0, -2.0])


def test_a_sequence_diag_by_hand():
    A, sigma = a_sequence(np.diag([1.0, 2.0]))
    assert np.allclose(A[1], np.diag([-2.0, -1.0]))
    assert np.allclose(np.diag([1.0, 2.0]) @ A[1], sigma[1] * np.eye(2))


def test_a_sequence_nilpotent_gives_powers():
    N = np.eye(3, k=1)
    A, sigma = a_sequence(N)
    assert np.allclose(sigma, 0)
    for i in range(3):
        assert np.allclose(A[i], np.linalg.matrix_power(N, i))


@given(st.integers(2, 6).flatmap(square))
def test_char_poly_matches_determinant(A):
    n = A.shape[0]
    sigma = char_poly_sigma(A)
    for lam in np.cos(np.pi * (np.arange(n + 1) + 0.5) / (n + 1)) * 2:
        det = np.linalg.det(lam * np.eye(n) - A)
        assert char_poly_eval(sigma, lam) == pytest.approx(det, rel=1e-9, abs=1e-11)


@given(square(4))
def test_adjugate_identity(A):
    for lam in range(5):
        assert adjugate_identity_residual(A, float(lam)) < 1e-9 * (1 + lam) ** 4


@given(st.integers(2, 6).flatmap(square))
def test_cayley_hamilton_closure(A):
    n = A.shape[0]
    Aseq, sigma = a_sequence(A)
    assert np.max(np.abs(A @ Aseq[n - 1] - sigma[n - 1] * np.eye(n))) < 1e-10


def test_wrong_recursion_sign_is_caught():
    A = np.random.default_rng(1).uniform(-1, 1, (4, 4))
    with pytest.raises(CayleyHamiltonViolated):
        a_sequence(A, _sign=-1.0)


def test_cyclic_vectors():
    N = np.eye(3, k=1)
    assert is_cyclic(N, np.array([0.0, 0.0, 1.0]))
    assert not is_cyclic(N, np.array([1.0, 0.0, 0.0]))
    assert not is_cyclic(np.eye(3), np.ones(3))


def test_gl_regular_search():
    assert is_gl_regular(np.diag([1.0, 2.0, 3.0]))
    res = is_gl_regular(np.diag([1.0, 1.0, 3.0]))
    assert not res and res.witness is None
    with pytest.raises(NotGlRegular):
        cyclic_vector(np.eye(2))


@given(square(4), arrays(np.float64, 4, elements=entries))
def test_cyclicity_matches_a_basis(A, v):
    # v, Lv, ... independent iff A_0 v, ..., A_{n-1} v independent
    Aseq, _ = a_sequence(A, check=False)
    K2 = np.stack([Ai @ v for Ai in Aseq], axis=-1)
    d1, d2 = np.linalg.det(krylov(A, v)), np.linalg.det(K2)
    # the two Krylov-type matrices differ by a unipotent change of basis
    assert abs(d1) == pytest.approx(abs(d2), rel=1e-8, abs=1e-13)
    assert (abs(d1) > 1e-10) == (abs(d2) > 1e-10) or min(abs(d1), abs(d2)) > 0.5e-10


@given(square(4), arrays(np.float64, 4, elements=entries))
def test_commutant_round_trip(A, g):
    assume(np.max(np.abs(A)) > 0.1)
    assume(is_gl_regular(A, rtol=1e-4))
    cond = np.linalg.cond(krylov(A / np.max(np.abs(A)), cyclic_vector(A)))
    assume(cond < 1e6)
    M = from_commutant_coeffs(A, g)
    assert np.allclose(commutant_coeffs(A, M), g, atol=1e-12 * cond)


def test_commutant_coeffs_at_small_scale():
    L = 1e-30 * np.diag([1.0, 2.0, 3.0])
    g = np.array([1e60, 1e30, 1.0])
    assert np.allclose(commutant_coeffs(L, from_commutant_coeffs(L, g)), g, rtol=1e-10)


def test_commutant_rejects_non_commuting():
    L = np.diag([1.0, 2.0, 3.0])
    with pytest.raises(DoesNotCommute):
        commutant_coeffs(L, np.eye(3, k=1))
