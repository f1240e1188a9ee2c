"""Operators A_i of det(lambda - L)(lambda - L)^{-1}, the residual of the system
u_{t_i} = A_i(u) u_x on a grid, and common symmetries / conservation laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import PASS_RTOL, expansion_coefficients, residual_scale, symmetry_residual
from .errors import GridTooCoarse, NotAHierarchy, NotASymmetry
from .fields import OperatorField, ScalarField
from .hierarchy import Hierarchy, chain_residual

__all__ = [
    "sigma_with_partials",
    "a_sequence_field",
    "a_fields",
    "SolutionGrid",
    "HydroResidual",
    "hydro_residual",
    "refinement_ratio",
    "common_symmetry_B",
    "common_cl_from_symmetry",
]


def _recursion_partials(Lv, dL):
    """Faddeev-LeVerrier together with its derivative along each coordinate.

    Returns sigma (..., n), dsigma (..., n, n) [i, k], A (..., n, n, n) [i, a, b]
    and dA (..., n, n, n, n) [i, a, b, k] for A_0..A_{n-1}.
    """
    n = Lv.shape[-1]
    shp = Lv.shape[:-2]
    eye = np.eye(n)
    sigma = np.zeros(shp + (n,))
    dsigma = np.zeros(shp + (n, n))
    A = np.zeros(shp + (n, n, n))
    dA = np.zeros(shp + (n, n, n, n))
    A[..., 0, :, :] = eye
    prev = np.broadcast_to(eye, Lv.shape)
    dprev = np.zeros(shp + (n, n, n))
    for i in range(1, n + 1):
        LA = Lv @ prev
        dLA = np.einsum("...ask,...sb->...abk", dL, prev) + np.einsum("...as,...sbk->...abk", Lv, dprev)
        s = np.trace(LA, axis1=-2, axis2=-1) / i
        ds = np.einsum("...aak->...k", dLA) / i
        sigma[..., i - 1] = s
        dsigma[..., i - 1, :] = ds
        if i < n:
            prev = LA - s[..., None, None] * eye
            dprev = dLA - ds[..., None, None, :] * eye[:, :, None]
            A[..., i, :, :] = prev
            dA[..., i, :, :, :] = dprev
    return sigma, dsigma, A, dA


def sigma_with_partials(L: OperatorField, u):
    """sigma_i(u) and d sigma_i / d u^k, exact given L's partials."""
    Lv, dL = L(u)
    sigma, dsigma, _, _ = _recursion_partials(Lv, dL)
    return sigma, dsigma


def a_sequence_field(L: OperatorField, u):
    """(A, dA, sigma, dsigma) at ``u``; A[..., i] is A_i for i = 0..n-1."""
    Lv, dL = L(u)
    sigma, dsigma, A, dA = _recursion_partials(Lv, dL)
    return A, dA, sigma, dsigma


def a_fields(L: OperatorField) -> list[OperatorField]:
    """[A_0 = Id, A_1, ..., A_{n-1}] as operator fields with exact partials."""

    def make(i):
        def func(u):
            A, dA, _, _ = a_sequence_field(L, u)
            return A[..., i, :, :], dA[..., i, :, :, :]

        return OperatorField(L.n, func, L.domain, f"A{i}")

    return [make(i) for i in range(L.n)]


@dataclass
class SolutionGrid:
    """u(x, t_1, ..., t_{n-1}) on a tensor grid.

    ``u`` has shape ``(len(x), len(t_1), ..., len(t_{n-1}), n)``.
    """

    x: np.ndarray
    t: list
    u: np.ndarray
    converged: np.ndarray
    residual: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def axes(self) -> list[np.ndarray]:
        return [self.x] + list(self.t)

    @property
    def n(self) -> int:
        return self.u.shape[-1]

    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def rows(self):
        """Yield (t_1..t_{n-1}, x, u, converged) per node in C order of (x, t...)."""
        axes = self.axes
        for idx in np.ndindex(*self.u.shape[:-1]):
            coords = [axes[a][i] for a, i in enumerate(idx)]
            yield coords[1:], coords[0], self.u[idx], bool(self.converged[idx])


@dataclass(frozen=True)
class HydroResidual:
    residuals: np.ndarray      # one per equation u_{t_i} = A_i u_x
    spacings: np.ndarray       # h per axis (x, t_1, ...)
    nodes: int

    def max(self) -> float:
        return float(np.max(self.residuals))


def _central(u, axis, h):
    sl_p = [slice(None)] * u.ndim
    sl_m = [slice(None)] * u.ndim
    sl_p[axis] = slice(2, None)
    sl_m[axis] = slice(None, -2)
    d = (u[tuple(sl_p)] - u[tuple(sl_m)]) / (2 * h)
    # trim the remaining axes to interior nodes
    sl = [slice(1, -1)] * (u.ndim - 1) + [slice(None)]
    sl[axis] = slice(None)
    return d[tuple(sl)]


def hydro_residual(grid: SolutionGrid, L: OperatorField, common_with: SolutionGrid | None = None) -> HydroResidual:
    """max over interior nodes of |D_{t_i} u - A_i(u) D_x u| by central differences.

    With ``common_with`` (a coarser grid on the same box) only nodes that are
    also interior nodes of the coarse grid are used.
    """
    axes = grid.axes
    for a in axes:
        if len(a) < 3:
            raise GridTooCoarse(f"central differences need 3 nodes per axis, got {len(a)}")
    h = np.array([(a[-1] - a[0]) / (len(a) - 1) for a in axes])
    u = grid.u
    n = grid.n
    interior = u[tuple([slice(1, -1)] * (u.ndim - 1))]
    A, _, _, _ = a_sequence_field(L, interior)
    ux = _central(u, 0, h[0])
    mask = np.ones(interior.shape[:-1], dtype=bool)
    if common_with is not None:
        for ax, (fine, coarse) in enumerate(zip(axes, common_with.axes)):
            keep = np.isclose(fine[1:-1][:, None], coarse[1:-1][None, :], rtol=0, atol=1e-12 * (1 + np.abs(fine).max())).any(axis=1)
            shape = [1] * mask.ndim
            shape[ax] = -1
            mask = mask & keep.reshape(shape)
    res = np.zeros(n - 1)
    for i in range(1, n):
        ut = _central(u, i, h[i])
        r = ut - np.einsum("...ab,...b->...a", A[..., i, :, :], ux)
        res[i - 1] = np.max(np.abs(r[mask]), initial=0.0)
    return HydroResidual(res, h, int(mask.sum()))


def refinement_ratio(coarse: SolutionGrid, fine: SolutionGrid, L: OperatorField) -> float:
    """Ratio of residuals at common nodes: about 4 for a second-order scheme."""
    rc = hydro_residual(coarse, L).max()
    rf = hydro_residual(fine, L, common_with=coarse).max()
    return rc / rf


def _probe_points(H: Hierarchy, probes):
    if probes is not None:
        return np.atleast_2d(np.asarray(probes, dtype=float))
    rng = np.random.default_rng(0)
    return H.base + 0.05 * rng.standard_normal((8, H.base.size))


def common_symmetry_B(H: Hierarchy, L: OperatorField, check: bool = True, probes=None,
                      tol: float = 1e-7) -> OperatorField:
    """B = f_1 A_{n-1} + ... + f_n A_0 from the potentials of a hierarchy of L."""
    if H.potentials is None:
        raise NotAHierarchy("hierarchy carries no potentials f_i")
    n = L.n
    if check:
        pts = _probe_points(H, probes)
        res = chain_residual(L, H, pts)
        scale = residual_scale(L, None, pts)
        if res > tol * scale:
            raise NotAHierarchy(f"chain residual |L^* df_i - df_(i+1)| = {res:.3e} exceeds {tol * scale:.3e}")

    def func(u):
        A, dA, _, _ = a_sequence_field(L, u)
        B = np.zeros(u.shape[:-1] + (n, n))
        dB = np.zeros(u.shape[:-1] + (n, n, n))
        for i, f in enumerate(H.potentials, start=1):
            val, grad, _ = f(u)
            Ai, dAi = A[..., n - i, :, :], dA[..., n - i, :, :, :]
            B += val[..., None, None] * Ai
            dB += val[..., None, None, None] * dAi + Ai[..., None] * grad[..., None, None, :]
        return B, dB

    return OperatorField(n, func, L.domain, "B")


@dataclass(frozen=True)
class CommonConservationLaw:
    g1: ScalarField
    chain_residual: float


def common_cl_from_symmetry(M: OperatorField, L: OperatorField, probes, tol: float = 1e-7,
                            h: float = 1e-5) -> CommonConservationLaw:
    """g_1 of M = sum g_i L^{n-i}; checks A_i^* dg_1 = dg_{i+1} at the probes."""
    pts = np.atleast_2d(np.asarray(probes, dtype=float))
    res = symmetry_residual(L, M, pts)
    scale = residual_scale(L, M, pts)
    if res > PASS_RTOL * scale:
        raise NotASymmetry(f"symmetry residual {res:.3e} exceeds {PASS_RTOL * scale:.3e}")
    n = L.n
    _, dg = expansion_coefficients(L, M, pts)
    A, _, _, _ = a_sequence_field(L, pts)
    chain = 0.0
    for i in range(1, n):
        pulled = np.einsum("...sj,...s->...j", A[..., i, :, :], dg[..., 0, :])
        chain = max(chain, float(np.max(np.abs(pulled - dg[..., i, :]))))
    if chain > tol * scale:
        raise NotASymmetry(f"chain residual |A_i^* dg_1 - dg_(i+1)| = {chain:.3e}")

    def func(u):
        g, dgu = expansion_coefficients(L, M, u)
        hess = np.empty(u.shape + (n,))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            hess[..., k] = (expansion_coefficients(L, M, u + e)[1][..., 0, :]
                            - expansion_coefficients(L, M, u - e)[1][..., 0, :]) / (2 * h)
        return g[..., 0], dgu[..., 0, :], 0.5 * (hess + np.swapaxes(hess, -1, -2))

    return CommonConservationLaw(ScalarField(n, func, L.domain, "g1"), chain)
