import numpy as np
import pytest

from nijhydro.calculus import torsion
from nijhydro.errors import NewtonDiverged, NotAConservationLaw, NotClosed, NotRegular
from nijhydro.fields import (
    BlockSpec,
    Diagonal1,
    JordanToeplitz,
    OneFormField,
    make_constant,
    make_toeplitz,
    operator_from_dual,
    scalar_from_dual,
)
from nijhydro.hierarchy import (
    chain_residual,
    closedness_on_box,
    companion_correspondence_check,
    generic_hierarchy,
    hierarchy_from_seed,
    integrate_closed_1form,
    invert_coordinates,
    is_regular_hierarchy,
    path_independence_defect,
    potential_field,
    pullback,
    second_companion_operator,
    standard_hierarchy,
)
from nijhydro.jets import exponential, identity

from conftest import diagonal_corpus, u_corpus

DIAG4 = BlockSpec([Diagonal1(identity()) for _ in range(4)])


def x_dy():
    return OneFormField(2, lambda u: (np.stack([0 * u[..., 0], u[..., 0]], -1),
                                      np.broadcast_to(np.array([[0.0, 0.0], [1.0, 0.0]]), u.shape + (2,))))


def test_pullback_jacobian_matches_finite_differences():
    L = operator_from_dual(lambda x: [[x[0] * x[1], 1.0], [x[1].sin(), x[0]]], 2)
    w = scalar_from_dual(lambda x: (x[0] * x[1]).exp(), 2).differential()
    pb = pullback(L, w)
    p, h = np.array([0.3, 0.6]), 1e-6
    _, J = pb(p)
    fd = np.stack([(pb.value(p + h * e) - pb.value(p - h * e)) / (2 * h) for e in np.eye(2)], -1)
    assert np.allclose(J, fd, atol=1e-7)


def test_exact_forms_integrate_to_potential_differences():
    f = scalar_from_dual(lambda x: x[0] * x[1].sin() + x[2] * x[2] * x[0], 3)
    p = np.array([0.1, 0.2, 0.3])
    u = np.random.default_rng(0).uniform(-1, 1, (6, 3))
    out = integrate_closed_1form(f.differential(), p, u)
    assert np.allclose(out, f.value(u) - f.value(p), atol=1e-10)
    assert path_independence_defect(f.differential(), p, u) < 1e-10


def test_non_closed_form_is_rejected():
    with pytest.raises(NotClosed):
        integrate_closed_1form(x_dy(), np.zeros(2), np.ones(2))
    assert closedness_on_box(x_dy(), [0, 0], [1, 1]) == 1.0
    # staircase order matters for a non-closed form
    assert path_independence_defect(x_dy(), np.zeros(2), np.ones(2)) == pytest.approx(1.0)


def test_potential_field_gradient():
    w = scalar_from_dual(lambda x: x[0].exp() * x[1], 2).differential()
    F = potential_field(w, np.array([0.0, 1.0]))
    v, g, _ = F(np.array([0.5, 2.0]))
    assert v == pytest.approx(np.exp(0.5) * 2 - 1.0, abs=1e-10)
    assert np.allclose(g, [np.exp(0.5) * 2, np.exp(0.5)])


def test_standard_hierarchy_diagonal_closed_form():
    H = standard_hierarchy(DIAG4)
    u = np.array([1.0, 2.0, 3.0, 4.0])
    vals = [f.value(u) for f in H.potentials]
    assert np.allclose(vals, [10.0, 15.0, 100 / 3, 354 / 4])
    assert chain_residual(DIAG4.operator(), H, u) < 1e-12


@pytest.mark.parametrize("spec", [
    BlockSpec([JordanToeplitz(2), JordanToeplitz(2)]),
    BlockSpec([JordanToeplitz(2), Diagonal1(exponential(1.0))]),
])
def test_standard_hierarchy_chains(spec):
    pts = np.random.default_rng(1).uniform(0.5, 1.5, (10, spec.n))
    assert chain_residual(spec.operator(), standard_hierarchy(spec), pts) < 1e-10


@pytest.mark.parametrize("k", [3, 4])
def test_generic_hierarchy_for_larger_blocks(k):
    spec = BlockSpec([JordanToeplitz(k)])
    base = np.linspace(0.5, 1.5, k)
    H = generic_hierarchy(spec, base=base)
    pts = base + 0.1 * np.random.default_rng(k).standard_normal((5, k))
    assert chain_residual(spec.operator(), H, pts) < 1e-10
    assert np.all(is_regular_hierarchy(H, pts))
    # potentials by quadrature agree with their differentials
    _, g, _ = H.potentials[2](pts[0])
    assert np.allclose(g, H.forms[2].value(pts[0]), atol=1e-12)


def test_seed_must_be_a_conservation_law():
    L = make_toeplitz(2)
    with pytest.raises(NotAConservationLaw):
        hierarchy_from_seed(L, scalar_from_dual(lambda x: x[0] * x[0] * x[1], 2), np.array([0.5, 1.0]))


def test_regularity_fails_at_coincident_eigenvalues():
    H = standard_hierarchy(DIAG4)
    assert is_regular_hierarchy(H, np.array([1.0, 2.0, 3.0, 4.0]))
    assert not is_regular_hierarchy(H, np.array([1.0, 2.0, 2.0, 4.0]))


@pytest.mark.parametrize("make", [u_corpus, diagonal_corpus])
def test_iterated_pullbacks_of_conservation_laws_are_closed(make):
    rng = np.random.default_rng(7)
    L, _, laws, pts = make(rng, 3)
    for f in laws:
        w = f.differential()
        for _ in range(L.n):
            w = pullback(L, w)
            assert w.closedness_residual(pts) < 1e-7


def test_first_companion_for_nilpotent():
    N = make_constant(np.eye(3, k=1))
    M = operator_from_dual(lambda x: [[x[2], x[1], x[0]], [0.0, x[2], x[1]], [0.0, 0.0, x[2]]], 3)
    rep = companion_correspondence_check(N, M, np.array([0.3, 0.5, 0.7]))
    assert rep.layout == "comp1" and rep.deviation < 1e-12 and rep.sigma_deviation < 1e-12


def test_irregular_symmetry_is_rejected():
    N = make_constant(np.eye(3, k=1))
    with pytest.raises(NotRegular):
        companion_correspondence_check(N, make_constant(np.eye(3)), np.ones(3))


def test_second_companion_for_diagonal():
    spec = BlockSpec([Diagonal1(identity()), Diagonal1(identity())])
    H = standard_hierarchy(spec)
    rep = companion_correspondence_check(spec.operator(), H, np.array([1.0, 2.5]))
    assert rep.layout == "comp2" and rep.deviation < 1e-12 and rep.sigma_deviation < 1e-12


def test_invert_coordinates():
    H = standard_hierarchy(BlockSpec([Diagonal1(identity()), Diagonal1(identity())]))
    u = np.array([[1.0, 2.0], [1.2, 1.9]])
    x = np.stack([f.value(u) for f in H.potentials], -1)
    assert np.allclose(invert_coordinates(H, x, np.array([1.1, 2.1])), u, atol=1e-12)
    # u1 + u2 = 2 with u1^2 + u2^2 = 1 has no real solution
    with pytest.raises(NewtonDiverged):
        invert_coordinates(H, np.array([2.0, 0.5]), np.array([0.5, 1.5]))


@pytest.mark.parametrize("k", [2, 3, 4])
def test_transported_second_companion_is_nijenhuis(k):
    spec = BlockSpec([JordanToeplitz(k)])
    base = np.concatenate([[0.7], np.linspace(1.0, 1.5, k - 1)])
    H = standard_hierarchy(spec, base) if k == 2 else generic_hierarchy(spec, base=base)
    C = second_companion_operator(spec.operator(), H, base)
    us = base + 0.05 * np.random.default_rng(k).standard_normal((10, k))
    xs = np.stack([f.value(us) for f in H.potentials], -1)
    assert np.max(np.abs(torsion(C, xs))) < 1e-9
