"""Jordan-Toeplitz blocks: h(U), the symmetry family of a block, its
conservation laws, block-diagonal composition and closed-form hierarchies.

An upper-triangular Toeplitz k x k matrix is identified with its *symbol*, a
polynomial in lambda truncated mod lambda^k: the matrix with first row
(s_0, s_1, ..., s_{k-1}) is sum_d s_d N^d.  Under this identification U has
symbol p(lambda) = u^k + lambda u^{k-1} + ... + lambda^{k-1} u^1 and h(U) has
symbol h(p(lambda)) mod lambda^k.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, InsufficientJetOrder, UnsupportedBlockSize
from .fields import (
    BlockSpec,
    Box,
    Diagonal1,
    JordanToeplitz,
    OperatorField,
    ScalarField,
    shift_matrix,
)
from .jets import series_compose, series_mul

__all__ = [
    "toeplitz_from_symbol",
    "u_symbol",
    "h_of_U",
    "h_of_U_field",
    "jordan_symmetry",
    "jordan_symmetry_field",
    "jordan_conservation_law",
    "jordan_conservation_law_field",
    "compose_symmetry",
    "standard_hierarchy_potentials",
    "BlockFunctions",
]


def toeplitz_from_symbol(s: np.ndarray) -> np.ndarray:
    k = s.shape[-1]
    out = np.zeros(s.shape[:-1] + (k, k))
    for d in range(k):
        out += s[..., d, None, None] * shift_matrix(k, d)
    return out


def u_symbol(u: np.ndarray) -> np.ndarray:
    """Symbol of U: coefficient of lambda^d is u^{k-d} (1-based)."""
    return np.asarray(u, dtype=float)[..., ::-1]


def _taylor(h: Callable, s, order: int) -> np.ndarray:
    d = np.asarray(h(s, order), dtype=float)
    if d.shape[-1] < order + 1:
        raise InsufficientJetOrder(f"jet of order {d.shape[-1] - 1} supplied, {order} required")
    return d[..., : order + 1] / np.array([math.factorial(m) for m in range(order + 1)])


def _h_symbol(h: Callable, u: np.ndarray, shift: int = 0) -> np.ndarray:
    """Symbol of h^(shift)(U) (needs the jet of h to order k-1+shift)."""
    k = u.shape[-1]
    p = u_symbol(u)
    d = np.asarray(h(p[..., 0], k - 1 + shift), dtype=float)
    if d.shape[-1] < k + shift:
        raise InsufficientJetOrder(f"jet of order {d.shape[-1] - 1} supplied, {k - 1 + shift} required")
    d = d[..., shift: shift + k]
    outer = d / np.array([math.factorial(m) for m in range(k)])
    return series_compose(outer, p)


def _shift_symbol(s: np.ndarray, power: int) -> np.ndarray:
    """Multiply a symbol by lambda^power (mod lambda^k)."""
    k = s.shape[-1]
    out = np.zeros_like(s)
    if power < k:
        out[..., power:] = s[..., : k - power]
    return out


def h_of_U(h: Callable, u, k: int | None = None, partials: bool = False):
    """The matrix h(U) at block coordinates ``u`` (shape ``(..., k)``).

    With ``partials`` also returns d h(U)/du^j = h'(U) N^{k-j}.
    """
    u = np.asarray(u, dtype=float)
    if k is not None and u.shape[-1] != k:
        raise DimensionMismatch(f"block size {k} but coordinates of length {u.shape[-1]}")
    k = u.shape[-1]
    H = toeplitz_from_symbol(_h_symbol(h, u))
    if not partials:
        return H
    hp = _h_symbol(h, u, shift=1)
    dH = np.stack(
        [toeplitz_from_symbol(_shift_symbol(hp, k - 1 - j)) for j in range(k)], axis=-1
    )
    return H, dH


def h_of_U_field(h: Callable, k: int, domain: Box | None = None) -> OperatorField:
    return OperatorField(k, lambda u: h_of_U(h, u, partials=True), domain, "h(U)")


def _symmetry_symbol(fs: Sequence[Callable], u: np.ndarray, shift: int = 0) -> np.ndarray:
    """Symbol of sum_i f_i^(shift)(U) N^{k-i}."""
    k = u.shape[-1]
    if len(fs) != k:
        raise DimensionMismatch(f"block of size {k} needs {k} functions, got {len(fs)}")
    total = np.zeros(u.shape)
    for i, f in enumerate(fs, start=1):
        total = total + _shift_symbol(_h_symbol(f, u, shift), k - i)
    return total


def jordan_symmetry(fs: Sequence[Callable], u, partials: bool = False):
    """M = f_1(U) N^{k-1} + ... + f_k(U) for one Jordan-Toeplitz block."""
    u = np.asarray(u, dtype=float)
    k = u.shape[-1]
    M = toeplitz_from_symbol(_symmetry_symbol(fs, u))
    if not partials:
        return M
    sp = _symmetry_symbol(fs, u, shift=1)
    dM = np.stack([toeplitz_from_symbol(_shift_symbol(sp, k - 1 - j)) for j in range(k)], axis=-1)
    return M, dM


def jordan_symmetry_field(fs: Sequence[Callable], domain: Box | None = None) -> OperatorField:
    k = len(fs)
    return OperatorField(k, lambda u: jordan_symmetry(fs, u, partials=True), domain, "M_jordan")


def jordan_conservation_law(fs: Sequence[Callable], u):
    """f = M^1_k (upper-right corner of the block symmetry): value, gradient, Hessian."""
    u = np.asarray(u, dtype=float)
    k = u.shape[-1]
    val = _symmetry_symbol(fs, u)[..., k - 1]
    s1 = _symmetry_symbol(fs, u, shift=1)
    s2 = _symmetry_symbol(fs, u, shift=2)
    grad = np.stack([_shift_symbol(s1, k - 1 - j)[..., k - 1] for j in range(k)], axis=-1)
    hess = np.empty(u.shape + (k,))
    for j in range(k):
        for m in range(k):
            hess[..., j, m] = _shift_symbol(s2, 2 * k - 2 - j - m)[..., k - 1]
    return val, grad, hess


def jordan_conservation_law_field(fs: Sequence[Callable], domain: Box | None = None) -> ScalarField:
    k = len(fs)
    return ScalarField(k, lambda u: jordan_conservation_law(fs, u), domain, "f_corner")


@dataclass(frozen=True)
class BlockFunctions:
    """Per-block one-variable data: ``[F]`` for a 1x1 block, ``[f_1..f_k]`` for a Jordan block."""

    functions: tuple

    def __init__(self, functions):
        object.__setattr__(self, "functions", tuple(functions))


def _block_eigenvalues(spec: BlockSpec, u: np.ndarray) -> list[np.ndarray]:
    out = []
    for b, s in zip(spec.blocks, spec.slices()):
        if isinstance(b, Diagonal1):
            out.append(b.eigenvalue(u[..., s.start], 0)[..., 0])
        else:
            out.append(u[..., s.stop - 1])
    return out


def compose_symmetry(spec: BlockSpec, functions: Sequence, domain: Box | None = None,
                     spectral_gap: float = 1e-8) -> OperatorField:
    """Block-diagonal symmetry assembled from per-block one-variable functions.

    A warning is issued when two blocks share an eigenvalue at an evaluation
    point, since the splitting argument then no longer applies.
    """
    if len(functions) != len(spec.blocks):
        raise DimensionMismatch("one BlockFunctions entry per block required")
    fsets = [f.functions if isinstance(f, BlockFunctions) else tuple(f) for f in functions]
    for b, fs in zip(spec.blocks, fsets):
        if len(fs) != b.size:
            raise DimensionMismatch(f"block of size {b.size} given {len(fs)} functions")
    n = spec.n
    slices = spec.slices()

    def gap_check(u):
        if len(slices) > 1:
            eig = _block_eigenvalues(spec, u)
            for a in range(len(eig)):
                for b in range(a + 1, len(eig)):
                    if np.any(np.abs(eig[a] - eig[b]) < spectral_gap):
                        warnings.warn("blocks share an eigenvalue at an evaluation point; "
                                      "splitting does not apply there", RuntimeWarning, stacklevel=3)

    def func(u):
        shp = u.shape[:-1]
        M = np.zeros(shp + (n, n))
        dM = np.zeros(shp + (n, n, n))
        for s, fs in zip(slices, fsets):
            Mb, dMb = jordan_symmetry(fs, u[..., s], partials=True)
            M[..., s, s] = Mb
            dM[..., s, s, s] = dMb
        gap_check(u)
        return M, dM

    def value_func(u):
        M = np.zeros(u.shape[:-1] + (n, n))
        for s, fs in zip(slices, fsets):
            M[..., s, s] = jordan_symmetry(fs, u[..., s])
        gap_check(u)
        return M

    return OperatorField(n, func, domain, "M", value_func)


def standard_hierarchy_potentials(spec: BlockSpec) -> list[ScalarField]:
    """Closed-form regular hierarchy f_1..f_n for blocks of size 1 and 2.

    1x1 block with eigenvalue lam(u):  contributes lam^i / i to f_i
      (seed sum lam_j; equals sum (u^j)^i / i for lam = id).
    2x2 Toeplitz block (u^a, u^b):     contributes (u^b)^{i-1} u^a to f_i.
    """
    for b in spec.blocks:
        if isinstance(b, JordanToeplitz) and b.size > 2:
            raise UnsupportedBlockSize(
                f"no closed-form hierarchy for Jordan blocks of size {b.size}; "
                "use hierarchy.generic_hierarchy"
            )
    n = spec.n
    slices = spec.slices()

    def make(i: int) -> ScalarField:
        def func(u):
            shp = u.shape[:-1]
            val = np.zeros(shp)
            grad = np.zeros(shp + (n,))
            hess = np.zeros(shp + (n, n))
            for b, s in zip(spec.blocks, slices):
                if isinstance(b, Diagonal1):
                    j = s.start
                    d = b.eigenvalue(u[..., j], 2)
                    lam, l1, l2 = d[..., 0], d[..., 1], d[..., 2]
                    val += lam**i / i
                    grad[..., j] += lam ** (i - 1) * l1
                    hess[..., j, j] += (i - 1) * lam ** max(i - 2, 0) * l1 * l1 * (i > 1) + \
                        lam ** (i - 1) * l2
                elif b.size == 1:
                    j = s.start
                    val += u[..., j] ** i / i
                    grad[..., j] += u[..., j] ** (i - 1)
                    if i > 1:
                        hess[..., j, j] += (i - 1) * u[..., j] ** (i - 2)
                else:
                    a, e = s.start, s.start + 1
                    ua, ue = u[..., a], u[..., e]
                    val += ue ** (i - 1) * ua
                    grad[..., a] += ue ** (i - 1)
                    if i > 1:
                        grad[..., e] += (i - 1) * ue ** (i - 2) * ua
                        hess[..., a, e] += (i - 1) * ue ** (i - 2)
                        hess[..., e, a] += (i - 1) * ue ** (i - 2)
                    if i > 2:
                        hess[..., e, e] += (i - 1) * (i - 2) * ue ** (i - 3) * ua
            return val, grad, hess

        return ScalarField(n, func, None, f"f{i}")

    return [make(i) for i in range(1, n + 1)]
