"""Integration of u_{t_i} = A_i(u) u_x in quadratures for a prescribed initial curve.

Pipeline: xi along the curve, the commuting operator M-hat with M-hat gamma' = xi,
extraction of one-variable block functions, extension to a symmetry M, the
functions g_i with dg_i = M^* df_i, and a Newton solve of
g_n(u) = x, g_{n-i}(u) = t_i on a grid.
"""

from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .calculus import residual_scale, symmetry_residual
from .errors import (
    EvaluationError,
    NewtonDiverged,
    NonMonotoneEigenvalueCoordinate,
    NotASymmetry,
    NotCyclicVelocity,
    NotClosed,
    OutOfSampledRange,
    SingularHierarchyMatrix,
    SmoothnessDeficit,
)
from .fields import BlockSpec, Box, Curve, Diagonal1, OperatorField
from .hierarchy import Hierarchy, closedness_on_box, integrate_staircase, pullback
from .hydro import SolutionGrid
from .jordan import BlockFunctions, _h_symbol, compose_symmetry
from .linalg import CYCLIC_RTOL, hadamard_ratio, krylov, powers

__all__ = [
    "CurveFrame",
    "xi_on_curve",
    "mhat_on_curve",
    "SplineJetFunction",
    "ExtractedSymmetryData",
    "extract_block_functions",
    "extend_symmetry",
    "eigen_limits",
    "GHierarchy",
    "build_g_hierarchy",
    "newton_batch",
    "solve_point",
    "solve_grid",
    "Pipeline",
]

NEWTON_TOL = 1e-11
MAX_BACKTRACKS = 30
REGULAR_RTOL = 1e-12
KRYLOV_TOL = 1e-9


@dataclass(frozen=True)
class CurveFrame:
    """Data along the curve at parameters ``x`` (all arrays batched over x)."""

    x: np.ndarray
    gamma: np.ndarray
    velocity: np.ndarray
    xi: np.ndarray
    c: np.ndarray
    mhat: np.ndarray
    krylov_residual: float


def xi_on_curve(H: Hierarchy, curve: Curve, x, return_cond: bool = False):
    """Solve omega_i(gamma(x)) . xi = delta_{in}."""
    x = np.asarray(x, dtype=float)
    W = H.covectors(curve(x))
    n = W.shape[-1]
    ratio = hadamard_ratio(np.swapaxes(W, -1, -2))
    bad = np.atleast_1d(ratio <= REGULAR_RTOL)
    if np.any(bad):
        xb = np.atleast_1d(x)[np.argmax(bad)] if np.ndim(x) else float(x)
        raise SingularHierarchyMatrix(
            f"differentials df_1..df_n are dependent at gamma({float(xb):.6g}); the hierarchy is not regular there"
        )
    rhs = np.zeros(W.shape[:-1])
    rhs[..., n - 1] = 1.0
    xi = np.linalg.solve(W, rhs[..., None])[..., 0]
    if return_cond:
        return xi, np.linalg.cond(W)
    return xi


def mhat_on_curve(L: OperatorField, curve: Curve, x, xi) -> CurveFrame:
    """Krylov coefficients c with sum c_k L^k gamma' = xi, and M-hat = sum c_k L^k."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = curve(x)
    v = curve.velocity(x)
    Lv = L.value(g)
    n = L.n
    An = Lv / np.maximum(np.linalg.norm(Lv, axis=(-2, -1)), 1e-300)[..., None, None]
    vn = v / np.maximum(np.linalg.norm(v, axis=-1), 1e-300)[..., None]
    ratio = hadamard_ratio(krylov(An, vn))
    if np.any(ratio <= CYCLIC_RTOL):
        xb = float(x[np.argmax(ratio <= CYCLIC_RTOL)])
        raise NotCyclicVelocity(
            f"gamma'(x) is not a cyclic vector of L(gamma(x)) at x = {xb:.6g} "
            f"(required at every point of the initial curve)", x=xb)
    K = krylov(Lv, v)
    xi = np.broadcast_to(np.asarray(xi, dtype=float), g.shape)
    c = np.linalg.solve(K, xi[..., None])[..., 0]
    P = powers(Lv, n)  # (..., n, n, n), P[..., k] = L^k
    mhat = np.einsum("...k,...kab->...ab", c, P)
    res = float(np.max(np.abs(np.einsum("...ab,...b->...a", mhat, v) - xi)))
    scale = 1.0 + float(np.max(np.abs(xi)))
    if res > KRYLOV_TOL * scale * 1e3:
        raise NotCyclicVelocity(f"Krylov solve is ill-conditioned along the curve (residual {res:.3e})")
    return CurveFrame(x, g, v, xi, c, mhat, res)


class SplineJetFunction:
    """Interpolating spline of a sampled function, usable as a jet function."""

    def __init__(self, s, values, degree: int = 3, name: str = "F"):
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s[0] > s[-1]:
            s, values = s[::-1], values[::-1]
        if degree == 3:
            self.spline = CubicSpline(s, values, bc_type="not-a-knot")
        else:
            self.spline = make_interp_spline(s, values, k=degree)
        self.degree = degree
        self.lo, self.hi = float(s[0]), float(s[-1])
        self.name = name
        self._derivs = [self.spline] + [self.spline.derivative(m) for m in range(1, degree + 1)]

    def __call__(self, s, order: int = 0) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        eps = 1e-12 * (1 + abs(self.lo) + abs(self.hi))
        if np.any(s < self.lo - eps) or np.any(s > self.hi + eps):
            raise OutOfSampledRange(
                f"{self.name} evaluated at eigenvalue coordinate outside the sampled range "
                f"[{self.lo:.6g}, {self.hi:.6g}] (no extrapolation)"
            )
        out = np.zeros(s.shape + (order + 1,))
        for m in range(min(order, self.degree) + 1):
            out[..., m] = self._derivs[m](s)
        return out

    def __repr__(self):
        return f"SplineJetFunction({self.name} on [{self.lo:.4g}, {self.hi:.4g}])"


@dataclass(frozen=True)
class ExtractedSymmetryData:
    functions: tuple          # one BlockFunctions per block
    ranges: tuple             # (lo, hi) of each block's eigenvalue coordinate
    samples: int
    consistency: float


def _spline_degree(k: int) -> int:
    return 3 if k <= 3 else k + (k % 2 == 0)


def _extract_once(spec: BlockSpec, frames: CurveFrame) -> tuple:
    out = []
    for bi, (b, sl) in enumerate(zip(spec.blocks, spec.slices())):
        k = b.size
        e = sl.stop - 1
        s = frames.gamma[:, e]
        ds = np.diff(s)
        if not (np.all(ds > 0) or np.all(ds < 0)):
            raise NonMonotoneEigenvalueCoordinate(
                f"eigenvalue coordinate u^{e + 1} of block {bi} is not strictly monotone along the curve"
            )
        deg = _spline_degree(k)
        m = frames.mhat[:, sl.start, sl]  # symbol coefficients m_0..m_{k-1}
        if isinstance(b, Diagonal1):
            out.append(BlockFunctions([SplineJetFunction(s, m[:, 0], deg, f"F[{bi}]")]))
            continue
        ublock = frames.gamma[:, sl]
        fs = [None] * k  # fs[j-1] = f_j
        fs[k - 1] = SplineJetFunction(s, m[:, 0], deg, f"f{k}[{bi}]")
        for r in range(1, k):
            known = m[:, r].copy()
            for j in range(k - r + 1, k + 1):
                sym = _h_symbol(fs[j - 1], ublock)
                known -= sym[:, r - (k - j)]
            fs[k - r - 1] = SplineJetFunction(s, known, deg, f"f{k - r}[{bi}]")
        out.append(BlockFunctions(fs))
    return tuple(out)


def _table_difference(a: tuple, b: tuple, spec: BlockSpec, s_points: list) -> float:
    worst = 0.0
    for bf_a, bf_b, blk, s in zip(a, b, spec.blocks, s_points):
        order = max(blk.size - 1, 0)
        for fa, fb in zip(bf_a.functions, bf_b.functions):
            da, db = fa(s, order), fb(s, order)
            worst = max(worst, float(np.max(np.abs(da - db) / (1 + np.abs(db)))))
    return worst


def extract_block_functions(spec: BlockSpec, L: OperatorField, curve: Curve, xi_fn,
                            samples: int = 33, max_samples: int = 4097,
                            consistency_tol: float = 1e-6) -> ExtractedSymmetryData:
    """Sample M-hat along the curve and recover the one-variable block functions.

    ``xi_fn(x)`` returns xi at the parameters ``x``.  The number of samples
    doubles until the tables (with derivatives up to block size - 1) agree
    with the previous resolution to ``consistency_tol``.
    """
    need = max(b.size for b in spec.blocks)
    if curve.order < need:
        raise SmoothnessDeficit(
            f"curve smoothness order {curve.order} below the largest block size {need}")
    a, b = curve.domain
    prev, count = None, samples
    while True:
        xs = np.linspace(a, b, count)
        frames = mhat_on_curve(L, curve, xs, xi_fn(xs))
        tables = _extract_once(spec, frames)
        if prev is not None:
            s_points = [frames.gamma[:, sl.stop - 1] for sl in spec.slices()]
            diff = _table_difference(prev, tables, spec, s_points)
            if diff < consistency_tol:
                break
            if count >= max_samples:
                raise SmoothnessDeficit(
                    f"block-function tables not self-consistent ({diff:.3e}) with {count} samples")
        prev, count = tables, 2 * count - 1
    ranges = tuple((f.functions[0].lo, f.functions[0].hi) for f in tables)
    return ExtractedSymmetryData(tables, ranges, count, diff)


def eigen_limits(spec: BlockSpec, data: ExtractedSymmetryData) -> tuple:
    """Coordinate bounds implied by the sampled eigenvalue ranges (others unbounded)."""
    lo = np.full(spec.n, -np.inf)
    hi = np.full(spec.n, np.inf)
    for e, (a, b) in zip(spec.eigen_coordinate(), data.ranges):
        lo[e], hi[e] = a, b
    return lo, hi


def extend_symmetry(data: ExtractedSymmetryData, spec: BlockSpec, domain: Box | None = None) -> OperatorField:
    """Block-diagonal symmetry whose block functions are the extracted tables."""
    return compose_symmetry(spec, data.functions, domain)


@dataclass
class GHierarchy:
    """g_1..g_n with dg_i = M^* omega_i and g_i(base) = 0."""

    M: OperatorField
    H: Hierarchy
    base: np.ndarray
    tol: float = 1e-10
    closedness: float = float("nan")
    limits: tuple | None = None  # (lower, upper) per coordinate where g can be evaluated

    @property
    def n(self) -> int:
        return self.H.n

    def admissible(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        ok = np.all(np.isfinite(u), axis=-1)
        if self.limits is not None:
            lo, hi = self.limits
            ok &= np.all((u >= lo) & (u <= hi), axis=-1)
        return ok

    @property
    def forms(self) -> tuple:
        return tuple(pullback(self.M, w) for w in self.H.forms)

    def jacobian(self, u) -> np.ndarray:
        """Rows dg_i(u) = M(u)^T omega_i(u)."""
        return np.einsum("...sk,...is->...ik", self.M.value(u), self.H.covectors(u))

    def values(self, u) -> np.ndarray:
        return integrate_staircase(self.jacobian, self.base, u, self.tol)

    def on_curve_defects(self, curve: Curve, xs, x0: float = 0.0) -> tuple[float, float]:
        """max |g(gamma(x)) - (0, .., 0, x - x0)| and max |d/dx g_i(gamma(x)) - delta_in|."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        g = curve(xs)
        v = curve.velocity(xs)
        target = np.zeros((xs.size, self.n))
        target[:, -1] = xs - x0
        vals = self.values(g)
        dd = np.einsum("...ij,...j->...i", self.jacobian(g), v)
        delta = np.zeros(self.n)
        delta[-1] = 1.0
        return float(np.max(np.abs(vals - target))), float(np.max(np.abs(dd - delta)))


def build_g_hierarchy(M: OperatorField, H: Hierarchy, base, L: OperatorField | None = None,
                      box=None, probes=None, closed_tol: float = 1e-7,
                      quad_tol: float = 1e-10) -> GHierarchy:
    """Forms dg_i = M^* omega_i, checked closed on ``box`` before any integration."""
    base = np.asarray(base, dtype=float)
    if L is not None and probes is not None:
        pts = np.atleast_2d(np.asarray(probes, dtype=float))
        res = symmetry_residual(L, M, pts)
        scale = residual_scale(L, M, pts)
        if res > 1e-6 * scale:
            raise NotASymmetry(f"extended operator is not a symmetry: residual {res:.3e}")
    forms = tuple(pullback(M, w) for w in H.forms)
    closed = float("nan")
    if box is not None:
        lo, hi = box
        closed = closedness_on_box(forms, lo, hi)
        if closed > closed_tol:
            raise NotClosed(f"M^* df_i not closed on the solve box (residual {closed:.3e})")
    return GHierarchy(M, H, base, quad_tol, closed)


def _safe_values(G: GHierarchy, u: np.ndarray) -> np.ndarray:
    out = np.full(u.shape, np.inf)
    ok = np.flatnonzero(G.admissible(u))
    if not ok.size:
        return out
    try:
        out[ok] = G.values(u[ok])
        return out
    except (EvaluationError, OutOfSampledRange, FloatingPointError):
        for r in ok:
            try:
                out[r] = G.values(u[r:r + 1])[0]
            except (EvaluationError, OutOfSampledRange, FloatingPointError):
                pass
        return out


def newton_batch(G: GHierarchy, targets, guesses, tol: float = NEWTON_TOL, max_iter: int = 40,
                 max_backtracks: int = MAX_BACKTRACKS):
    """Damped Newton on G(u) = targets row by row.  Returns (u, converged, residual)."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    u = np.atleast_2d(np.asarray(guesses, dtype=float)).copy()
    F = _safe_values(G, u) - targets
    r = np.max(np.abs(F), axis=1)
    failed = ~np.isfinite(r)
    for _ in range(max_iter):
        active = np.flatnonzero((r >= tol) & ~failed)
        if not active.size:
            break
        J = G.jacobian(u[active])
        ok = np.isfinite(J).all(axis=(1, 2)) & (np.abs(np.linalg.det(J)) > 0)
        step = np.zeros((active.size, u.shape[1]))
        if ok.any():
            step[ok] = np.linalg.solve(J[ok], F[active[ok]][..., None])[..., 0]
        failed[active[~ok]] = True
        pending = active[ok]
        lam = np.ones(pending.size)
        step_p = step[ok]
        for _bt in range(max_backtracks + 1):
            if not pending.size:
                break
            trial = u[pending] - lam[:, None] * step_p
            Ft = _safe_values(G, trial) - targets[pending]
            rt = np.max(np.abs(Ft), axis=1)
            accept = rt < r[pending]
            u[pending[accept]] = trial[accept]
            F[pending[accept]] = Ft[accept]
            r[pending[accept]] = rt[accept]
            pending, step_p, lam = pending[~accept], step_p[~accept], 0.5 * lam[~accept]
        failed[pending] = True
    return u, (r < tol) & np.isfinite(r), r


def solve_point(G: GHierarchy, target, guess, tol: float = NEWTON_TOL) -> np.ndarray:
    """Solve (g_1, .., g_n)(u) = target; raise NewtonDiverged on failure."""
    u, conv, r = newton_batch(G, np.asarray(target, float)[None], np.asarray(guess, float)[None], tol)
    if not conv[0]:
        raise NewtonDiverged(
            f"Newton did not reach |G| < {tol:g} (residual {r[0]:.3e}); the target may lie outside "
            f"the neighbourhood where the functional system is solvable", u[0], float(r[0]))
    return u[0]


def g_targets(x, t) -> np.ndarray:
    """(g_1, ..., g_n) targets (t_{n-1}, ..., t_1, x)."""
    return np.concatenate([np.asarray(t, float)[..., ::-1], np.asarray(x, float)[..., None]], axis=-1)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("NIJHYDRO_THREADS", "1")))
    except ValueError:
        return 1


def _solve_lines(G, curve, x, t_grids, x0, tol):
    """Continuation outward from the t-node nearest 0, in waves of increasing
    index distance; each wave is one batched Newton solve over all x."""
    nt = [len(t) for t in t_grids]
    center = [int(np.argmin(np.abs(t))) for t in t_grids]
    shape = (len(x),) + tuple(nt)
    n = len(t_grids) + 1
    u = np.zeros(shape + (n,))
    conv = np.zeros(shape, dtype=bool)
    nodes = list(itertools.product(*[range(m) for m in nt]))
    dist = {idx: sum(abs(i - c) for i, c in zip(idx, center)) for idx in nodes}
    gamma = curve(x)
    for d in range(max(dist.values()) + 1):
        wave = [idx for idx in nodes if dist[idx] == d]
        guesses, targets, where = [], [], []
        for idx in wave:
            if d == 0:
                prev_u = gamma
            else:
                # predecessor: step the last off-centre axis one node toward the centre
                ax = max(a for a in range(len(idx)) if idx[a] != center[a])
                p = list(idx)
                p[ax] += 1 if idx[ax] < center[ax] else -1
                prev_u = u[(slice(None),) + tuple(p)]
            tval = np.array([t_grids[a][i] for a, i in enumerate(idx)])
            guesses.append(prev_u)
            targets.append(g_targets(x - x0, np.broadcast_to(tval, (len(x), len(tval)))))
            where.append(idx)
        sol, ok, _ = newton_batch(G, np.concatenate(targets), np.concatenate(guesses), tol)
        sol = sol.reshape(len(wave), len(x), n)
        ok = ok.reshape(len(wave), len(x))
        for w, idx in enumerate(where):
            u[(slice(None),) + idx] = sol[w]
            conv[(slice(None),) + idx] = ok[w]
    return u, conv


def solve_grid(G: GHierarchy, curve: Curve, x_grid, t_grids, x0: float = 0.0,
               tol: float = NEWTON_TOL, threads: int | None = None) -> SolutionGrid:
    """u on the grid (x, t_1, ..., t_{n-1}); non-converged nodes are flagged."""
    x = np.asarray(x_grid, dtype=float)
    t_grids = [np.asarray(t, dtype=float) for t in t_grids]
    threads = _thread_count() if threads is None else max(1, threads)
    chunks = [c for c in np.array_split(np.arange(x.size), min(threads, x.size)) if c.size]
    if len(chunks) == 1:
        parts = [_solve_lines(G, curve, x, t_grids, x0, tol)]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda c: _solve_lines(G, curve, x[c], t_grids, x0, tol), chunks))
    u = np.concatenate([p[0] for p in parts], axis=0)
    conv = np.concatenate([p[1] for p in parts], axis=0)
    return SolutionGrid(x, t_grids, u, conv)


@dataclass
class Pipeline:
    """The complete chain from (L, hierarchy, curve) to the g-hierarchy."""

    spec: BlockSpec
    L: OperatorField
    H: Hierarchy
    curve: Curve
    x0: float = 0.0
    samples: int = 33
    frames: CurveFrame | None = None
    data: ExtractedSymmetryData | None = None
    M: OperatorField | None = None
    G: GHierarchy | None = None
    timings: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)

    def run(self, box=None, probes=None) -> "Pipeline":
        t0 = time.perf_counter()
        xi_fn = lambda xs: xi_on_curve(self.H, self.curve, xs)
        self.data = extract_block_functions(self.spec, self.L, self.curve, xi_fn, self.samples)
        xs = np.linspace(*self.curve.domain, 17)
        _, cond = xi_on_curve(self.H, self.curve, xs, return_cond=True)
        self.frames = mhat_on_curve(self.L, self.curve, xs, xi_fn(xs))
        self.conditions = {"hierarchy_max_cond": float(np.max(cond)),
                           "krylov_residual": self.frames.krylov_residual}
        t1 = time.perf_counter()
        self.M = extend_symmetry(self.data, self.spec)
        if probes is None:
            probes = self.curve(np.linspace(*self.curve.domain, 7)[1:-1])
        self.G = build_g_hierarchy(self.M, self.H, self.curve(self.x0), self.L, box, probes)
        self.G.limits = eigen_limits(self.spec, self.data)
        self.timings = {"extract": t1 - t0, "hierarchy": time.perf_counter() - t1}
        return self

    def solve(self, x_grid, t_grids, threads: int | None = None) -> SolutionGrid:
        t0 = time.perf_counter()
        grid = solve_grid(self.G, self.curve, x_grid, t_grids, self.x0, threads=threads)
        self.timings["solve"] = time.perf_counter() - t0
        return grid
