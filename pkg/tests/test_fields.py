import numpy as np
import pytest

from nijhydro.errors import DimensionMismatch, EvaluationError
from nijhydro.fields import (
    BlockSpec,
    Box,
    Curve,
    Diagonal1,
    JordanToeplitz,
    ScalarField,
    make_block_diagonal,
    make_companion_first,
    make_companion_second,
    make_constant,
    make_diagonal,
    make_toeplitz,
    operator_fd_defect,
    operator_from_dual,
    scalar_fd_defect,
    scalar_from_dual,
    scalar_from_function,
    wrap_finite_difference,
)
from nijhydro.jets import exponential, identity, polynomial


def linear_sigma(n, c):
    return ScalarField(n, lambda u: (u @ c, np.broadcast_to(c, u.shape), np.zeros(u.shape + (n,))), None, "s")


def test_toeplitz_layout():
    U = make_toeplitz(3).value(np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(U, [[3, 2, 1], [0, 3, 2], [0, 0, 3]])


def test_block_diagonal_layout():
    spec = BlockSpec([JordanToeplitz(2), Diagonal1(exponential(1.0))])
    L = make_block_diagonal(spec).value(np.array([5.0, 7.0, 0.0]))
    assert np.allclose(L, [[7, 5, 0], [0, 7, 0], [0, 0, 1]])
    assert spec.eigen_coordinate() == [1, 2]


@pytest.mark.parametrize("build", [
    lambda: make_toeplitz(4),
    lambda: make_diagonal([identity(), exponential(0.5), polynomial([0, 0, 1])]),
    lambda: make_block_diagonal(BlockSpec([JordanToeplitz(2), Diagonal1(exponential(1.0))])),
    lambda: make_companion_first([linear_sigma(3, np.array([1.0, 2, 3]))] * 3),
    lambda: make_companion_second([linear_sigma(3, np.array([0.5, -1, 2]))] * 3),
    lambda: operator_from_dual(lambda x: [[x[0] * x[1], x[1].exp()], [x[0].sin(), 1.0]], 2),
])
def test_partials_agree_with_finite_differences(build):
    L = build()
    p = np.linspace(0.3, 0.9, L.n)
    assert operator_fd_defect(L, p) < 1e-8


def test_companion_layouts():
    sig = [linear_sigma(3, np.eye(3)[i]) for i in range(3)]
    u = np.array([1.0, 2.0, 3.0])
    C1 = make_companion_first(sig).value(u)
    C2 = make_companion_second(sig).value(u)
    assert np.allclose(C1[:, 0], u) and np.allclose(C1[:, 1:], np.eye(3, k=1)[:, 1:])
    assert np.allclose(C2[2], u[::-1]) and np.allclose(C2[:2], np.eye(3, k=1)[:2])


def test_scalar_fields_and_differentials():
    f = scalar_from_dual(lambda x: x[0] * x[0] * x[1] + x[1].exp(), 2)
    gap_val, gap_grad = scalar_fd_defect(f, np.array([0.5, 0.2]))
    assert gap_val < 1e-7 and gap_grad < 1e-6
    g = scalar_from_function(lambda u: u[..., 0] * u[..., 1], 2)
    _, grad, _ = g(np.array([2.0, 3.0]))
    assert np.allclose(grad, [3.0, 2.0], atol=1e-7)
    assert f.differential().closedness_residual(np.array([0.5, 0.2])) < 1e-14


def test_wrapped_finite_difference_field():
    L = wrap_finite_difference(lambda u: np.stack([np.stack([u[..., 0] ** 2, u[..., 1]], -1),
                                                   np.stack([0 * u[..., 0], u[..., 0]], -1)], -2), 2)
    _, dL = L(np.array([1.5, 2.0]))
    assert dL[0, 0, 0] == pytest.approx(3.0, rel=1e-6)


def test_domain_and_dimension_checks():
    box = Box.from_bounds([[0, 1], [0, 1]])
    L = make_constant(np.eye(2), domain=box)
    with pytest.raises(EvaluationError):
        L.value(np.array([2.0, 0.5]))
    with pytest.raises(DimensionMismatch):
        L.value(np.ones(3))
    assert L.with_domain(None).value(np.array([2.0, 0.5])).shape == (2, 2)
    pts = box.sample(np.random.default_rng(0), 50)
    assert pts.shape == (50, 2) and np.all((pts >= 0) & (pts <= 1))


def test_non_finite_values_are_reported():
    L = operator_from_dual(lambda x: [[x[0].log(), 0.0], [0.0, 1.0]], 2)
    with np.errstate(all="ignore"), pytest.raises(EvaluationError):
        L.value(np.array([-1.0, 0.0]))


def test_product_rule():
    A = make_toeplitz(2)
    B = make_diagonal([identity(), exponential(1.0)])
    assert operator_fd_defect(A @ B, np.array([0.4, 0.8])) < 1e-8


def test_curve_derivatives_and_bounds():
    c = Curve([polynomial([1.0, 1.0]), polynomial([0, 0, 1.0])], (-1.0, 1.0), order=2)
    d = c.derivatives(np.array(0.5), 2)
    assert np.allclose(d, [[1.5, 0.25], [1.0, 1.0], [0.0, 2.0]])
    assert np.allclose(c.velocity(0.0), [1.0, 0.0])
    with pytest.raises(EvaluationError):
        c(2.0)
    with pytest.raises(EvaluationError):
        c.derivatives(0.0, 3)
