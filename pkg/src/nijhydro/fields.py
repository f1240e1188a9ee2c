"""Operator, scalar and 1-form fields on coordinate boxes in R^n, plus curves.

Every field is vectorised: points are arrays of shape ``(..., n)``.
Derivative arrays put the differentiation index last, e.g. for an operator
field ``dL[..., a, b, k] = d L[a, b] / d u^k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, EvaluationError
from .jets import Dual2

__all__ = [
    "Box",
    "OperatorField",
    "ScalarField",
    "OneFormField",
    "Curve",
    "Diagonal1",
    "JordanToeplitz",
    "BlockSpec",
    "make_diagonal",
    "make_toeplitz",
    "make_block_diagonal",
    "make_companion_first",
    "make_companion_second",
    "make_constant",
    "wrap_finite_difference",
    "operator_from_dual",
    "scalar_from_dual",
    "scalar_from_function",
    "operator_fd_defect",
    "scalar_fd_defect",
    "shift_matrix",
]


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_bounds(cls, bounds) -> "Box":
        b = np.asarray(bounds, dtype=float)
        return cls(b[:, 0].copy(), b[:, 1].copy())

    def check(self, u: np.ndarray, what: str = "field"):
        if np.any(u < self.lower - 1e-12) or np.any(u > self.upper + 1e-12):
            raise EvaluationError(
                f"{what} evaluated outside its domain box "
                f"[{self.lower.tolist()}, {self.upper.tolist()}]"
            )

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * rng.random((count, self.lower.size))


def _check_point(u, n: int, domain: Box | None, name: str) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != n:
        raise DimensionMismatch(f"{name}: expected points in R^{n}, got shape {u.shape}")
    if domain is not None:
        domain.check(u, name)
    return u


@dataclass(frozen=True)
class OperatorField:
    """Matrix-valued function with exact first partials.

    ``func(u)`` returns ``(L, dL)`` with shapes ``(..., n, n)`` and
    ``(..., n, n, n)``.
    """

    n: int
    func: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    domain: Box | None = None
    name: str = "L"
    value_func: Callable[[np.ndarray], np.ndarray] | None = None  # optional cheaper path

    def __call__(self, u):
        u = _check_point(u, self.n, self.domain, self.name)
        L, dL = self.func(u)
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(dL))):
            raise EvaluationError(f"{self.name} produced non-finite values")
        return L, dL

    def value(self, u) -> np.ndarray:
        if self.value_func is None:
            return self(u)[0]
        u = _check_point(u, self.n, self.domain, self.name)
        L = self.value_func(u)
        if not np.all(np.isfinite(L)):
            raise EvaluationError(f"{self.name} produced non-finite values")
        return L

    def with_domain(self, domain: Box | None) -> "OperatorField":
        return OperatorField(self.n, self.func, domain, self.name, self.value_func)

    def __matmul__(self, other: "OperatorField") -> "OperatorField":
        """Pointwise product with product-rule partials."""
        a, b = self, other

        def func(u):
            A, dA = a(u)
            B, dB = b(u)
            return A @ B, np.einsum("...ask,...sb->...abk", dA, B) + np.einsum(
                "...as,...sbk->...abk", A, dB
            )

        return OperatorField(self.n, func, self.domain, f"{a.name}*{b.name}")


@dataclass(frozen=True)
class ScalarField:
    """``func(u) -> (value, gradient, hessian)``."""

    n: int
    func: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]
    domain: Box | None = None
    name: str = "f"

    def __call__(self, u):
        u = _check_point(u, self.n, self.domain, self.name)
        return self.func(u)

    def value(self, u):
        return self(u)[0]

    def differential(self) -> "OneFormField":
        def func(u):
            _, g, H = self(u)
            return g, H

        return OneFormField(self.n, func, self.domain, f"d{self.name}")


@dataclass(frozen=True)
class OneFormField:
    """``func(u) -> (omega, jac)`` with ``jac[..., j, k] = d omega_j / d u^k``."""

    n: int
    func: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    domain: Box | None = None
    name: str = "omega"

    def __call__(self, u):
        u = _check_point(u, self.n, self.domain, self.name)
        return self.func(u)

    def value(self, u):
        return self(u)[0]

    def closedness_residual(self, u) -> float:
        _, J = self(u)
        return float(np.max(np.abs(J - np.swapaxes(J, -1, -2)), initial=0.0))

    def __add__(self, other: "OneFormField") -> "OneFormField":
        def func(u):
            a, Ja = self(u)
            b, Jb = other(u)
            return a + b, Ja + Jb

        return OneFormField(self.n, func, self.domain, f"{self.name}+{other.name}")

    def scaled(self, c: float) -> "OneFormField":
        def func(u):
            a, J = self(u)
            return c * a, c * J

        return OneFormField(self.n, func, self.domain, f"{c}*{self.name}")


@dataclass(frozen=True)
class Curve:
    """gamma: [a, b] -> R^n given by one jet function per component.

    ``derivatives(x, m)`` returns shape ``(..., m+1, n)``.
    """

    components: Sequence[Callable]
    domain: tuple[float, float]
    order: int = 3
    name: str = "gamma"

    @property
    def n(self) -> int:
        return len(self.components)

    def derivatives(self, x, m: int = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a, b = self.domain
        if np.any(x < a - 1e-12) or np.any(x > b + 1e-12):
            raise EvaluationError(f"{self.name} evaluated outside [{a}, {b}]")
        if m > self.order:
            raise EvaluationError(f"{self.name} has smoothness order {self.order} < {m}")
        return np.stack([c(x, m) for c in self.components], axis=-1)

    def __call__(self, x):
        return self.derivatives(x, 0)[..., 0, :]

    def velocity(self, x):
        return self.derivatives(x, 1)[..., 1, :]


# --- block structure --------------------------------------------------------


@dataclass(frozen=True)
class Diagonal1:
    """1x1 block with eigenvalue lam(u^i) (a jet function)."""

    eigenvalue: Callable
    size: int = field(default=1, init=False)


@dataclass(frozen=True)
class JordanToeplitz:
    """k x k upper-triangular Toeplitz block U with first row (u^k, ..., u^1)."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("block size must be positive")


@dataclass(frozen=True)
class BlockSpec:
    blocks: tuple

    def __init__(self, blocks):
        object.__setattr__(self, "blocks", tuple(blocks))

    @property
    def n(self) -> int:
        return sum(b.size for b in self.blocks)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.size))
            start += b.size
        return out

    def eigen_coordinate(self) -> list[int]:
        """Index of the coordinate carrying each block's eigenvalue (last of the block)."""
        return [s.stop - 1 for s in self.slices()]

    def operator(self, domain: Box | None = None) -> OperatorField:
        return make_block_diagonal(self, domain=domain)


def shift_matrix(k: int, power: int = 1) -> np.ndarray:
    """N^power for the k x k upper shift N."""
    return np.eye(k, k=power) if power < k else np.zeros((k, k))


# --- constructors -----------------------------------------------------------


def make_constant(A, domain: Box | None = None, name: str = "L") -> OperatorField:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]

    def func(u):
        shp = u.shape[:-1]
        return np.broadcast_to(A, shp + (n, n)).copy(), np.zeros(shp + (n, n, n))

    return OperatorField(n, func, domain, name)


def make_diagonal(lams: Sequence[Callable], domain: Box | None = None) -> OperatorField:
    """L = diag(lam_i(u^i)) for jet functions lam_i."""
    n = len(lams)

    def func(u):
        L = np.zeros(u.shape[:-1] + (n, n))
        dL = np.zeros(u.shape[:-1] + (n, n, n))
        for i, lam in enumerate(lams):
            d = lam(u[..., i], 1)
            L[..., i, i] = d[..., 0]
            dL[..., i, i, i] = d[..., 1]
        return L, dL

    return OperatorField(n, func, domain, "diag")


def make_toeplitz(k: int, domain: Box | None = None) -> OperatorField:
    """Toeplitz Jordan block U on R^k; U[a, b] = u^{k-(b-a)} for b >= a."""
    if k < 1:
        raise ValueError("k must be positive")
    dU = np.zeros((k, k, k))
    for j in range(k):  # derivative w.r.t. u^{j+1} is N^{k-1-j}
        dU[:, :, j] = shift_matrix(k, k - 1 - j)

    def func(u):
        shp = u.shape[:-1]
        U = np.zeros(shp + (k, k))
        for d in range(k):
            U += u[..., k - 1 - d, None, None] * shift_matrix(k, d)
        return U, np.broadcast_to(dU, shp + (k, k, k)).copy()

    return OperatorField(k, func, domain, f"U{k}")


def _block_field(block) -> OperatorField:
    if isinstance(block, Diagonal1):
        return make_diagonal([block.eigenvalue])
    if isinstance(block, JordanToeplitz):
        return make_toeplitz(block.size)
    raise TypeError(f"unknown block type {block!r}")


def make_block_diagonal(spec: BlockSpec, fields: Sequence[OperatorField] | None = None,
                        domain: Box | None = None) -> OperatorField:
    """Direct sum of per-block fields acting on consecutive coordinate groups."""
    if fields is None:
        fields = [_block_field(b) for b in spec.blocks]
    if len(fields) != len(spec.blocks):
        raise DimensionMismatch("one field per block required")
    for b, f in zip(spec.blocks, fields):
        if f.n != b.size:
            raise DimensionMismatch(f"block of size {b.size} given a field on R^{f.n}")
    n = spec.n
    slices = spec.slices()

    def func(u):
        shp = u.shape[:-1]
        L = np.zeros(shp + (n, n))
        dL = np.zeros(shp + (n, n, n))
        for s, f in zip(slices, fields):
            Lb, dLb = f(u[..., s])
            L[..., s, s] = Lb
            dL[..., s, s, s] = dLb
        return L, dL

    return OperatorField(n, func, domain, "blockdiag")


def make_companion_first(sigmas: Sequence[ScalarField], domain: Box | None = None) -> OperatorField:
    """First column (sigma_1..sigma_n), ones on the superdiagonal."""
    n = len(sigmas)
    sup = np.eye(n, k=1)

    def func(u):
        shp = u.shape[:-1]
        L = np.broadcast_to(sup, shp + (n, n)).copy()
        dL = np.zeros(shp + (n, n, n))
        for i, s in enumerate(sigmas):
            v, g, _ = s(u)
            L[..., i, 0] = v
            dL[..., i, 0, :] = g
        return L, dL

    return OperatorField(n, func, domain, "comp1")


def make_companion_second(sigmas: Sequence[ScalarField], domain: Box | None = None) -> OperatorField:
    """Ones on the superdiagonal, last row (sigma_n, ..., sigma_1)."""
    n = len(sigmas)
    sup = np.eye(n, k=1)

    def func(u):
        shp = u.shape[:-1]
        L = np.broadcast_to(sup, shp + (n, n)).copy()
        dL = np.zeros(shp + (n, n, n))
        for i, s in enumerate(sigmas):
            v, g, _ = s(u)
            L[..., n - 1, n - 1 - i] = v
            dL[..., n - 1, n - 1 - i, :] = g
        return L, dL

    return OperatorField(n, func, domain, "comp2")


def default_fd_step(u: np.ndarray) -> np.ndarray:
    return 1e-5 * (1.0 + np.linalg.norm(u, axis=-1))


def wrap_finite_difference(raw: Callable[[np.ndarray], np.ndarray], n: int, h: float | None = None,
                           domain: Box | None = None, name: str = "L_fd") -> OperatorField:
    """Operator field whose partials come from central differences (O(h^2))."""

    def func(u):
        L = np.asarray(raw(u), dtype=float)
        step = default_fd_step(u) if h is None else np.full(u.shape[:-1], h)
        dL = np.empty(L.shape + (n,))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            du = step[..., None] * e
            try:
                dL[..., k] = (np.asarray(raw(u + du)) - np.asarray(raw(u - du))) / (
                    2 * step[..., None, None]
                )
            except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
                raise EvaluationError(f"{name}: evaluation failed near {u}") from exc
        return L, dL

    return OperatorField(n, func, domain, name)


def operator_from_dual(build: Callable[[list], list], n: int, domain: Box | None = None,
                       name: str = "L") -> OperatorField:
    """Operator field from a function mapping coordinate :class:`Dual2` objects to a
    nested list of entries (Dual2 or numbers)."""

    def func(u):
        xs = Dual2.variables(u)
        rows = build(xs)
        shp = u.shape[:-1]
        L = np.zeros(shp + (n, n))
        dL = np.zeros(shp + (n, n, n))
        for a in range(n):
            for b in range(n):
                e = rows[a][b]
                if isinstance(e, Dual2):
                    L[..., a, b] = e.val
                    dL[..., a, b, :] = e.grad
                else:
                    L[..., a, b] = e
        return L, dL

    return OperatorField(n, func, domain, name)


def scalar_from_dual(build: Callable[[list], object], n: int, domain: Box | None = None,
                     name: str = "f") -> ScalarField:
    def func(u):
        xs = Dual2.variables(u)
        e = build(xs)
        shp = u.shape[:-1]
        if not isinstance(e, Dual2):
            return np.full(shp, float(e)), np.zeros(shp + (n,)), np.zeros(shp + (n, n))
        return (np.broadcast_to(e.val, shp).copy(), np.broadcast_to(e.grad, shp + (n,)).copy(),
                np.broadcast_to(e.hess, shp + (n, n)).copy())

    return ScalarField(n, func, domain, name)


def scalar_from_function(f: Callable, n: int, h: float = 1e-4, domain: Box | None = None,
                         name: str = "f") -> ScalarField:
    """Scalar field with finite-difference gradient and Hessian (fallback only)."""

    def func(u):
        v = np.asarray(f(u), dtype=float)
        g = np.empty(u.shape[:-1] + (n,))
        H = np.empty(u.shape[:-1] + (n, n))
        eye = np.eye(n) * h
        for i in range(n):
            g[..., i] = (f(u + eye[i]) - f(u - eye[i])) / (2 * h)
            for j in range(n):
                H[..., i, j] = (f(u + eye[i] + eye[j]) - f(u + eye[i] - eye[j])
                                - f(u - eye[i] + eye[j]) + f(u - eye[i] - eye[j])) / (4 * h * h)
        return v, g, H

    return ScalarField(n, func, domain, name)


# --- consistency checks -----------------------------------------------------


def operator_fd_defect(L: OperatorField, u, h: float = 1e-6) -> float:
    """max |dL - central difference of L| over the given points."""
    u = np.asarray(u, dtype=float)
    _, dL = L(u)
    worst = 0.0
    for k in range(L.n):
        e = np.zeros(L.n)
        e[k] = h
        fd = (L.value(u + e) - L.value(u - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - dL[..., k]))))
    return worst


def scalar_fd_defect(f: ScalarField, u, h: float = 1e-5) -> tuple[float, float]:
    """(gradient defect, hessian defect) against central differences."""
    u = np.asarray(u, dtype=float)
    _, g, H = f(u)
    gd = hd = 0.0
    for k in range(f.n):
        e = np.zeros(f.n)
        e[k] = h
        vp, gp, _ = f(u + e)
        vm, gm, _ = f(u - e)
        gd = max(gd, float(np.max(np.abs((vp - vm) / (2 * h) - g[..., k]))))
        hd = max(hd, float(np.max(np.abs((gp - gm) / (2 * h) - H[..., :, k]))))
    return gd, hd
