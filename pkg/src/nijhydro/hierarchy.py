"""Conservation-law hierarchies: pullbacks, closed 1-form integration,
regularity, and the companion-coordinate correspondences."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _quad
from .calculus import PASS_RTOL, conservation_law_residual, expansion_coefficients
from .errors import NewtonDiverged, NotAConservationLaw, NotClosed, NotRegular
from .fields import BlockSpec, Box, Diagonal1, OneFormField, OperatorField, ScalarField
from .linalg import char_poly_sigma, hadamard_ratio

__all__ = [
    "Hierarchy",
    "pullback",
    "integrate_closed_1form",
    "integrate_forms",
    "integrate_staircase",
    "closedness_on_box",
    "path_independence_defect",
    "potential_field",
    "hierarchy_from_seed",
    "hierarchy_from_potentials",
    "standard_hierarchy",
    "generic_hierarchy",
    "is_regular_hierarchy",
    "chain_residual",
    "companion_correspondence_check",
    "CompanionReport",
    "invert_coordinates",
    "second_companion_operator",
]

QUAD_TOL = 1e-10
REGULAR_RTOL = 1e-10


def pullback(L: OperatorField, omega: OneFormField) -> OneFormField:
    """(L^* omega)_j = L^s_j omega_s with product-rule Jacobian."""

    def func(u):
        Lv, dL = L(u)
        w, J = omega(u)
        val = np.einsum("...sj,...s->...j", Lv, w)
        jac = np.einsum("...sjk,...s->...jk", dL, w) + np.einsum("...sj,...sk->...jk", Lv, J)
        return val, jac

    return OneFormField(L.n, func, L.domain, f"{L.name}*{omega.name}")


def _as_forms(omega) -> list[OneFormField]:
    if isinstance(omega, OneFormField):
        return [omega]
    return list(omega)


def closedness_on_box(omega, lower, upper, per_axis: int = 5, cap: int = 100_000) -> float:
    """max |d omega| on a lattice covering the box (lattice capped at ``cap`` points)."""
    forms = _as_forms(omega)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.size
    while per_axis > 2 and per_axis**n > cap:
        per_axis -= 1
    axes = [np.linspace(lo, hi, per_axis) if hi > lo else np.array([lo]) for lo, hi in zip(lower, upper)]
    pts = np.array(list(itertools.product(*axes)))
    return max(w.closedness_residual(pts) for w in forms)


def integrate_staircase(integrand, p, u, tol: float = QUAD_TOL, reverse: bool = False) -> np.ndarray:
    """Staircase integrals from ``p`` to each ``u`` of m covector fields.

    ``integrand(points)`` returns shape ``points.shape[:-1] + (m, n)``.  Leg
    order is u^1, u^2, ... (or reversed).  Returns ``u.shape[:-1] + (m,)``.
    """
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    n = p.size
    flat = u.reshape(-1, n)
    B = flat.shape[0]
    total = None
    order = range(n - 1, -1, -1) if reverse else range(n)
    for k in order:
        def fun(idx, s, k=k):
            pts = np.empty(s.shape + (n,))
            if reverse:
                pts[...] = p
                pts[..., k + 1:] = flat[idx, None, k + 1:]
            else:
                pts[...] = flat[idx, None, :]
                pts[..., k + 1:] = p[k + 1:]
            pts[..., k] = s
            return integrand(pts)[..., k]

        leg, _ = _quad.integrate_batch(fun, np.full(B, p[k]), flat[:, k], tol=tol)
        total = leg if total is None else total + leg
    return total.reshape(u.shape[:-1] + (total.shape[-1],))


def integrate_forms(forms: Sequence[OneFormField], p, u, tol: float = QUAD_TOL,
                    reverse: bool = False) -> np.ndarray:
    """Staircase integrals of several closed forms; shape ``u.shape[:-1] + (m,)``."""
    return integrate_staircase(lambda pts: np.stack([w.value(pts) for w in forms], axis=-2),
                               p, u, tol, reverse)


def _staircase_box(p, u):
    u = np.asarray(u, dtype=float).reshape(-1, np.size(p))
    lo = np.minimum(u.min(axis=0), p)
    hi = np.maximum(u.max(axis=0), p)
    return lo, hi


def integrate_closed_1form(omega, p, u, tol: float = QUAD_TOL, check_closed: bool = True,
                           closed_tol: float = 1e-7) -> np.ndarray:
    """Integral of a closed 1-form (or list of forms) along the staircase p -> u."""
    forms = _as_forms(omega)
    if check_closed:
        lo, hi = _staircase_box(p, u)
        res = closedness_on_box(forms, lo, hi)
        if res > closed_tol:
            raise NotClosed(f"closedness residual {res:.3e} on the integration box exceeds {closed_tol:g}")
    out = integrate_forms(forms, p, u, tol)
    return out[..., 0] if isinstance(omega, OneFormField) else out


def path_independence_defect(omega, p, u, tol: float = QUAD_TOL) -> float:
    forms = _as_forms(omega)
    a = integrate_forms(forms, p, u, tol)
    b = integrate_forms(forms, p, u, tol, reverse=True)
    return float(np.max(np.abs(a - b)))


def potential_field(omega: OneFormField, p, tol: float = QUAD_TOL, name: str = "f") -> ScalarField:
    """Scalar field with d(value) = omega, value(p) = 0 (value by quadrature)."""
    p = np.asarray(p, dtype=float)

    def func(u):
        w, J = omega(u)
        val = integrate_forms([omega], p, u, tol)[..., 0]
        return val, w, 0.5 * (J + np.swapaxes(J, -1, -2))

    return ScalarField(omega.n, func, omega.domain, name)


@dataclass(frozen=True)
class Hierarchy:
    """Forms omega_1..omega_n with L^* omega_i = omega_{i+1}; optional potentials."""

    forms: tuple
    potentials: tuple | None
    base: np.ndarray

    @property
    def n(self) -> int:
        return len(self.forms)

    def covectors(self, u) -> np.ndarray:
        """Rows omega_i(u): shape ``(..., n, n)``."""
        return np.stack([w.value(u) for w in self.forms], axis=-2)


def hierarchy_from_potentials(fs: Sequence[ScalarField], base=None) -> Hierarchy:
    n = fs[0].n
    base = np.zeros(n) if base is None else np.asarray(base, dtype=float)
    return Hierarchy(tuple(f.differential() for f in fs), tuple(fs), base)


def standard_hierarchy(spec: BlockSpec, base=None) -> Hierarchy:
    from .jordan import standard_hierarchy_potentials

    return hierarchy_from_potentials(standard_hierarchy_potentials(spec), base)


def hierarchy_from_seed(L: OperatorField, f: ScalarField, base, probes=None,
                        tol: float = PASS_RTOL, with_potentials: bool = True) -> Hierarchy:
    """omega_i = (L^*)^{i-1} df with potentials anchored at ``base``."""
    base = np.asarray(base, dtype=float)
    pts = base[None, :] if probes is None else np.vstack([base[None, :], np.asarray(probes, float)])
    res = conservation_law_residual(L, f, pts)
    Lv, dL = L(pts)
    _, g, H = f(pts)
    scale = (1 + np.max(np.abs(Lv))) * (1 + np.max(np.abs(dL))) * (1 + np.max(np.abs(g)) + np.max(np.abs(H)))
    if res > tol * scale:
        raise NotAConservationLaw(f"d(L^* df) residual {res:.3e} exceeds {tol * scale:.3e}")
    forms = [f.differential()]
    for _ in range(L.n - 1):
        forms.append(pullback(L, forms[-1]))
    pots = None
    if with_potentials:
        pots = tuple([f] + [potential_field(w, base, name=f"f{i + 2}") for i, w in enumerate(forms[1:])])
    return Hierarchy(tuple(forms), pots, base)


def generic_hierarchy(spec: BlockSpec, L: OperatorField | None = None, base=None) -> Hierarchy:
    """Hierarchy seeded by sum of block corner coordinates (Jordan blocks) and
    eigenvalues (1x1 blocks); works for any block sizes, potentials by quadrature."""
    n = spec.n
    L = spec.operator() if L is None else L
    base = np.zeros(n) if base is None else np.asarray(base, dtype=float)

    def seed(u):
        shp = u.shape[:-1]
        val = np.zeros(shp)
        grad = np.zeros(shp + (n,))
        hess = np.zeros(shp + (n, n))
        for b, s in zip(spec.blocks, spec.slices()):
            j = s.start
            if isinstance(b, Diagonal1):
                d = b.eigenvalue(u[..., j], 2)
                val += d[..., 0]
                grad[..., j] += d[..., 1]
                hess[..., j, j] += d[..., 2]
            else:
                val += u[..., j]
                grad[..., j] += 1.0
        return val, grad, hess

    f = ScalarField(n, seed, None, "f1")
    return hierarchy_from_seed(L, f, base)


def is_regular_hierarchy(H: Hierarchy, u, rtol: float = REGULAR_RTOL) -> np.ndarray | bool:
    """|det(rows omega_i(u))| above a scale-invariant threshold."""
    W = H.covectors(u)
    r = hadamard_ratio(np.swapaxes(W, -1, -2)) > rtol
    return bool(r) if np.ndim(r) == 0 else r


def chain_residual(L: OperatorField, H: Hierarchy, u) -> float:
    """max_i |L^* omega_i - omega_{i+1}|."""
    Lv = L.value(u)
    W = H.covectors(u)
    pulled = np.einsum("...sj,...is->...ij", Lv, W[..., :-1, :])
    return float(np.max(np.abs(pulled - W[..., 1:, :]), initial=0.0))


@dataclass(frozen=True)
class CompanionReport:
    layout: str
    deviation: float
    sigma_deviation: float
    points: int

    def __str__(self):
        return (f"{self.layout}: structural deviation {self.deviation:.3e}, "
                f"sigma deviation {self.sigma_deviation:.3e} over {self.points} point(s)")


def _companion_deviation(Lp: np.ndarray, layout: str) -> tuple[float, float]:
    n = Lp.shape[-1]
    sigma = char_poly_sigma(Lp)
    target = np.eye(n, k=1)
    mask = np.ones((n, n), dtype=bool)
    if layout == "comp1":
        mask[:, 0] = False
        sig_dev = np.max(np.abs(Lp[:, 0] - sigma))
    else:
        mask[n - 1, :] = False
        sig_dev = np.max(np.abs(Lp[n - 1, ::-1] - sigma))
    return float(np.max(np.abs(Lp - target)[mask])), float(sig_dev)


def companion_correspondence_check(L: OperatorField, obj, base, displacements=None,
                                   rtol: float = 1e-10) -> CompanionReport:
    """Transform L by the Jacobian of the candidate coordinates and compare layouts.

    ``obj`` is either a symmetry (OperatorField: coordinates are its expansion
    coefficients g_i, expected layout comp1) or a Hierarchy (coordinates f_i,
    expected layout comp2).  Checked at ``base`` and at displaced points.
    """
    base = np.asarray(base, dtype=float)
    pts = [base]
    if displacements is None:
        rng = np.random.default_rng(0)
        displacements = 1e-2 * rng.standard_normal((4, base.size))
    pts.extend(base + d for d in np.atleast_2d(displacements))
    pts = np.array(pts)
    if isinstance(obj, Hierarchy):
        J = obj.covectors(pts)
        layout = "comp2"
    else:
        _, J = expansion_coefficients(L, obj, pts)
        layout = "comp1"
    ratio = hadamard_ratio(np.swapaxes(J, -1, -2))
    if np.any(ratio <= rtol):
        raise NotRegular(f"coordinate Jacobian is singular (Hadamard ratio {ratio.min():.3e})")
    Lv = L.value(pts)
    Lt = J @ Lv @ np.linalg.inv(J)
    dev = sdev = 0.0
    for Lp in Lt:
        d, s = _companion_deviation(Lp, layout)
        dev, sdev = max(dev, d), max(sdev, s)
    return CompanionReport(layout, dev, sdev, len(pts))


def invert_coordinates(H: Hierarchy, x, guess, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Solve f_i(u) = x_i for u by Newton's method (potentials required)."""
    x = np.asarray(x, dtype=float)
    u = np.broadcast_to(np.asarray(guess, dtype=float), x.shape).copy()
    for _ in range(max_iter):
        F = np.stack([f.value(u) for f in H.potentials], axis=-1) - x
        if np.max(np.abs(F)) < tol * (1.0 + np.max(np.abs(x), initial=0.0)):
            return u
        try:
            u = u - np.linalg.solve(H.covectors(u), F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
    raise NewtonDiverged(f"cannot invert x_i = f_i(u) from the given guess (residual {np.max(np.abs(F)):.2e})")


def second_companion_operator(L: OperatorField, H: Hierarchy, guess, domain: Box | None = None) -> OperatorField:
    """L written in the coordinates x_i = f_i(u): the comp2 layout with
    sigma_i(x) = sigma_i(L(u(x))).  Partials of sigma by the chain rule."""
    from .hydro import sigma_with_partials

    n = L.n
    guess = np.asarray(guess, dtype=float)

    def func(x):
        u = invert_coordinates(H, x, guess)
        sigma, dsigma = sigma_with_partials(L, u)  # dsigma[..., i, k] = d sigma_i / d u^k
        Jinv = np.linalg.inv(H.covectors(u))      # du/dx
        dsx = np.einsum("...ik,...kx->...ix", dsigma, Jinv)
        shp = x.shape[:-1]
        Lc = np.broadcast_to(np.eye(n, k=1), shp + (n, n)).copy()
        dLc = np.zeros(shp + (n, n, n))
        for i in range(n):
            Lc[..., n - 1, n - 1 - i] = sigma[..., i]
            dLc[..., n - 1, n - 1 - i, :] = dsx[..., i, :]
        return Lc, dLc

    return OperatorField(n, func, domain, "comp2(x)")
