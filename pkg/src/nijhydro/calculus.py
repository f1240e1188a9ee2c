"""Pointwise tensor calculus for operator fields.

Tensors of type (1, 2) are stored as ``T[..., k, i, j]`` = k-th component of
T(d_i, d_j).  Coordinate formulas (constant basis fields, so [d_i, d_j] = 0):

    <L,M>^k_ij = -M^k_s d_j L^s_i + L^k_s d_i M^s_j - L^r_i d_r M^k_j + M^r_j d_r L^k_i
    N_L^k_ij   =  L^s_i d_s L^k_j - L^s_j d_s L^k_i - L^k_s (d_i L^s_j - d_j L^s_i)
"""

from __future__ import annotations

import numpy as np

from .errors import DoesNotCommute, NotASymmetry, NotGlRegular
from .fields import OperatorField, ScalarField
from .linalg import char_poly_sigma, cyclic_vector, krylov

PASS_RTOL = 1e-8
FAIL_RTOL = 1e-2
COMMUTE_RTOL = 1e-8

__all__ = [
    "bracket",
    "torsion",
    "symmetry_residual",
    "strong_symmetry_residual",
    "conservation_law_residual",
    "residual_scale",
    "power_partials",
    "expansion_coefficients",
    "system_s1_residual",
    "t_m_tensor",
    "commutator_norm",
]


def _max(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


def residual_scale(L: OperatorField, M: OperatorField | None, u) -> float:
    """(1+|L|)(1+|M|)(1+max|dL|+max|dM|), maxima over the given points."""
    Lv, dL = L(u)
    if M is None:
        Mv, dM = np.zeros_like(Lv), np.zeros_like(dL)
    else:
        Mv, dM = M(u)
    return (1 + _max(Lv)) * (1 + _max(Mv)) * (1 + _max(dL) + _max(dM))


def commutator_norm(L: OperatorField, M: OperatorField, u) -> float:
    Lv = L.value(u)
    Mv = M.value(u)
    return _max(Lv @ Mv - Mv @ Lv)


def _bracket_arrays(L, dL, M, dM):
    return (
        -np.einsum("...ks,...sij->...kij", M, dL)
        + np.einsum("...ks,...sji->...kij", L, dM)
        - np.einsum("...ri,...kjr->...kij", L, dM)
        + np.einsum("...rj,...kir->...kij", M, dL)
    )


def bracket(L: OperatorField, M: OperatorField, u, check_commute: bool = True,
            tol: float = COMMUTE_RTOL) -> np.ndarray:
    """The (1,2)-tensor <L, M> of two commuting operator fields."""
    Lv, dL = L(u)
    Mv, dM = M(u)
    if check_commute:
        comm = _max(Lv @ Mv - Mv @ Lv)
        scale = residual_scale(L, M, u)
        if comm > tol * scale:
            raise DoesNotCommute(f"|LM - ML| = {comm:.3e} exceeds {tol * scale:.3e}")
    return _bracket_arrays(Lv, dL, Mv, dM)


def torsion(L: OperatorField, u) -> np.ndarray:
    Lv, dL = L(u)
    return (
        np.einsum("...si,...kjs->...kij", Lv, dL)
        - np.einsum("...sj,...kis->...kij", Lv, dL)
        - np.einsum("...ks,...sji->...kij", Lv, dL)
        + np.einsum("...ks,...sij->...kij", Lv, dL)
    )


def symmetry_residual(L: OperatorField, M: OperatorField, u, check_commute: bool = True) -> float:
    """max over points of |symmetric part of <L, M>|."""
    B = bracket(L, M, u, check_commute)
    return _max(B + np.swapaxes(B, -1, -2)) / 2


def strong_symmetry_residual(L: OperatorField, M: OperatorField, u,
                             check_commute: bool = True) -> float:
    """max |<M, L>|, using <M, L>(xi, eta) = -<L, M>(eta, xi)."""
    B = bracket(L, M, u, check_commute)
    return _max(-np.swapaxes(B, -1, -2))


def conservation_law_residual(L: OperatorField, f: ScalarField, u) -> float:
    """max |d(L^* df)| assembled from the Hessian of f and the partials of L."""
    Lv, dL = L(u)
    _, g, H = f(u)
    # D[j, i] = d_i (L^s_j d_s f)
    D = np.einsum("...sji,...s->...ji", dL, g) + np.einsum("...sj,...is->...ji", Lv, H)
    return _max(D - np.swapaxes(D, -1, -2))


def power_partials(L, dL, m: int):
    """Powers L^0..L^{m-1} and their partials (stacked on axis -3 / -4)."""
    n = L.shape[-1]
    P = np.zeros(L.shape[:-2] + (m, n, n))
    dP = np.zeros(L.shape[:-2] + (m, n, n, n))
    P[..., 0, :, :] = np.eye(n)
    for p in range(1, m):
        P[..., p, :, :] = P[..., p - 1, :, :] @ L
        dP[..., p, :, :, :] = np.einsum("...ask,...sb->...abk", dP[..., p - 1, :, :, :], L) + \
            np.einsum("...as,...sbk->...abk", P[..., p - 1, :, :], dL)
    return P, dP


def _expansion_point(Lp, dLp, Mp, dMp, tol):
    n = Lp.shape[-1]
    comm = _max(Lp @ Mp - Mp @ Lp)
    scale = (1 + _max(Lp)) * (1 + _max(Mp))
    if comm > tol * scale:
        raise DoesNotCommute(f"|LM - ML| = {comm:.3e} at a probe point")
    v = cyclic_vector(Lp)
    P, dP = power_partials(Lp, dLp, n)
    P, dP = P[::-1], dP[::-1]  # P[i] = L^{n-1-i}, coefficient g_{i+1}
    K = np.einsum("iab,b->ai", P, v)
    g = np.linalg.solve(K, Mp @ v)
    rhs = dMp - np.einsum("i,iabk->abk", g, dP)
    dg = np.linalg.solve(K, np.einsum("abk,b->ak", rhs, v))
    return g, dg


def expansion_coefficients(L: OperatorField, M: OperatorField, u, tol: float = COMMUTE_RTOL):
    """g_i and dg_i in M = g_1 L^{n-1} + ... + g_n Id at each point.

    Returns ``g`` of shape ``(..., n)`` and ``dg`` of shape ``(..., n, n)``
    with ``dg[..., i, k] = d g_i / d u^k``.
    """
    u = np.asarray(u, dtype=float)
    Lv, dL = L(u)
    Mv, dM = M(u)
    n = L.n
    flat = u.reshape(-1, n)
    g = np.empty((flat.shape[0], n))
    dg = np.empty((flat.shape[0], n, n))
    Lf, dLf = Lv.reshape(-1, n, n), dL.reshape(-1, n, n, n)
    Mf, dMf = Mv.reshape(-1, n, n), dM.reshape(-1, n, n, n)
    for p in range(flat.shape[0]):
        g[p], dg[p] = _expansion_point(Lf[p], dLf[p], Mf[p], dMf[p], tol)
    return g.reshape(u.shape), dg.reshape(u.shape + (n,))


def _sigma_gradients(L: OperatorField, u, h: float = 1e-6):
    """sigma_i and a central-difference gradient (used only by diagnostics)."""
    sig = char_poly_sigma(L.value(u))
    grads = []
    for k in range(L.n):
        e = np.zeros(L.n)
        e[k] = h
        grads.append((char_poly_sigma(L.value(u + e)) - char_poly_sigma(L.value(u - e))) / (2 * h))
    return sig, np.stack(grads, axis=-1)


def system_s1_residual(L: OperatorField, M: OperatorField, u) -> float:
    """max_i |L^* dg_i - sigma_i dg_1 - dg_{i+1}| (dg_{n+1} := 0)."""
    Lv = L.value(u)
    sigma = char_poly_sigma(Lv)
    _, dg = expansion_coefficients(L, M, u)
    n = L.n
    pulled = np.einsum("...sj,...is->...ij", Lv, dg)
    nxt = np.concatenate([dg[..., 1:, :], np.zeros_like(dg[..., :1, :])], axis=-2)
    res = pulled - sigma[..., :, None] * dg[..., :1, :] - nxt
    return _max(res)


def t_m_tensor(L: OperatorField, M: OperatorField, u, check: bool = True,
               tol: float = PASS_RTOL):
    """T_M = sum_i dg_i (x) L^{n-i} and its defect max |T(L xi, eta) - T(xi, L eta)|.

    ``T[..., k, a, b]`` is the k-th component of T(e_a, e_b) = sum_i dg_i(e_a) L^{n-i} e_b.
    """
    u = np.asarray(u, dtype=float)
    if check:
        res = symmetry_residual(L, M, u)
        scale = residual_scale(L, M, u)
        if res > tol * scale:
            raise NotASymmetry(f"symmetry residual {res:.3e} exceeds {tol * scale:.3e}")
    Lv = L.value(u)
    n = L.n
    _, dg = expansion_coefficients(L, M, u)
    P = np.zeros(Lv.shape[:-2] + (n, n, n))
    P[..., 0, :, :] = np.eye(n)
    for p in range(1, n):
        P[..., p, :, :] = P[..., p - 1, :, :] @ Lv
    P = P[..., ::-1, :, :]
    T = np.einsum("...ia,...ikb->...kab", dg, P)
    left = np.einsum("...ca,...kcb->...kab", Lv, T)   # T(L e_a, e_b)
    right = np.einsum("...kac,...cb->...kab", T, Lv)  # T(e_a, L e_b)
    return T, _max(left - right)


def require_gl_regular(L: OperatorField, u):
    for p in np.asarray(u, dtype=float).reshape(-1, L.n):
        try:
            cyclic_vector(L.value(p))
        except NotGlRegular:
            raise NotGlRegular(f"{L.name} is not gl-regular at {p.tolist()}") from None
