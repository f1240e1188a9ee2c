"""Built-in examples: the two 3D operators that are Nijenhuis but not
gl-regular, their symmetry and conservation-law families, and pinned witnesses
showing that strong-symmetry, product-closure and M^* df closedness all fail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import conservation_law_residual, strong_symmetry_residual, symmetry_residual
from .fields import OperatorField, ScalarField, make_constant, operator_from_dual, scalar_from_dual

@dataclass(frozen=True)
class Poly2:
    """c0 + c1 p + c2 q + c3 pq + c4 p^2 + c5 q^2 with exact partials."""

    c: tuple = (0, 0, 0, 0, 0, 0)

    def __call__(self, p, q):
        c = self.c
        return c[0] + c[1] * p + c[2] * q + c[3] * p * q + c[4] * p * p + c[5] * q * q

    def dp(self) -> "Poly2":
        c = self.c
        return Poly2((c[1], 2 * c[4], c[3], 0, 0, 0))

    def dq(self) -> "Poly2":
        c = self.c
        return Poly2((c[2], c[3], 2 * c[5], 0, 0, 0))


def _p(c) -> Poly2:
    return c if isinstance(c, Poly2) else Poly2(tuple(c))


# --- first operator: two nilpotent blocks of sizes 2 and 1 ----------------------

def ce1_operator() -> OperatorField:
    return make_constant(np.array([[0.0, 1, 0], [0, 0, 0], [0, 0, 0]]), name="L_ce1")


def ce1_symmetry(f, g, a, b, c) -> OperatorField:
    """Family member; f, g, a, b, c are functions of (y, z)."""
    f, g, a, b, c = map(_p, (f, g, a, b, c))

    def build(xs):
        x, y, z = xs
        F = f(y, z)
        return [[F, x * f.dp()(y, z) + g(y, z), x * f.dq()(y, z) + a(y, z)],
                [0.0, F, 0.0],
                [0.0, b(y, z), c(y, z)]]

    return operator_from_dual(build, 3, name="M_ce1")


def ce1_conservation_law(uy, v) -> ScalarField:
    """x u(y) + v(y, z); ``uy`` is a Poly2 used as a function of y only."""
    uy, v = _p(uy), _p(v)
    return scalar_from_dual(lambda xs: xs[0] * uy(xs[1], 0.0) + v(xs[1], xs[2]), 3, name="f_ce1")


# --- second operator: eigenvalue z with blocks of sizes 1 and 2 -------------------

def ce2_operator() -> OperatorField:
    def build(xs):
        x, y, z = xs
        return [[z, 0.0, 0.0], [0.0, z, 1.0], [0.0, 0.0, z]]

    return operator_from_dual(build, 3, name="L_ce2")


def ce2_symmetry(f, g, a, b, c) -> OperatorField:
    """Family member; f, g, a, b, c are functions of (x, z)."""
    f, g, a, b, c = map(_p, (f, g, a, b, c))

    def build(xs):
        x, y, z = xs
        e = (-y).exp()
        F = f(x, z)
        return [[F + a(x, z) * e, 0.0, b(x, z) * e],
                [f.dp()(x, z) + c(x, z) * e, F, f.dq()(x, z) + g(x, z) * e],
                [0.0, 0.0, F]]

    return operator_from_dual(build, 3, name="M_ce2")


def ce2_conservation_law(a, bz) -> ScalarField:
    """a(x, z) e^y + b(z); ``bz`` is a Poly2 used as a function of z only."""
    a, bz = _p(a), _p(bz)
    return scalar_from_dual(lambda xs: a(xs[0], xs[2]) * xs[1].exp() + bz(0.0, xs[2]), 3, name="f_ce2")


CASES = {
    "ce1": (ce1_operator, ce1_symmetry, ce1_conservation_law),
    "ce2": (ce2_operator, ce2_symmetry, ce2_conservation_law),
}

PROBE = np.array([1.0, 1.0, 1.0])

# Witness parameters found by ``search_witnesses`` (seed 0) and pinned here.
# Each symmetry is (f, g, a, b, c); each conservation law is the pair of
# functions of the respective family.
PINNED = {'ce1': {'P1': ((2, 1, 0, -1, -1, -2),
                (-2, -2, -2, 2, 1, 2),
                (0, 1, 2, 1, 1, 0),
                (0, 2, -1, 2, 1, -2),
                (-1, 2, 0, -2, 1, 1)),
         'P2': (((2, -2, 1, 2, -2, -1),
                 (1, -2, 0, 1, 1, 2),
                 (0, 0, 0, 2, -2, 0),
                 (-2, 0, 2, 1, -1, 2),
                 (1, 2, -2, 0, 2, 1)),
                ((0, 0, 0, 0, -1, 1),
                 (-2, 0, -1, 1, 1, 1),
                 (2, 2, -2, -2, -2, 1),
                 (2, 2, 1, 2, 2, -2),
                 (-2, 2, -2, 2, 2, 2))),
         'P5': (((-1, 2, -1, -1, 1, 1),
                 (-2, -2, -1, 2, 0, 1),
                 (-1, -1, 1, 2, -2, -2),
                 (1, -1, 0, -2, 2, 0),
                 (2, 1, 1, -1, 1, -2)),
                ((0, 0, 2, -2, 2, -2), (1, 0, 2, -1, 2, 1)))},
 'ce2': {'P1': ((-1, -2, 0, 2, -1, 2),
                (-1, 2, -1, 0, -1, -1),
                (2, 2, -2, 2, 2, -1),
                (0, 0, 1, 0, -2, 2),
                (1, -2, 2, 1, -2, 1)),
         'P2': (((0, -2, 2, 1, -1, -2),
                 (-2, 1, -2, 0, 2, 2),
                 (-1, -2, 0, 2, 1, -2),
                 (1, -1, -1, 0, 2, 2),
                 (-2, 0, 1, -1, -1, -1)),
                ((-1, 2, -1, -1, -2, -2),
                 (1, -1, 2, 0, 2, 0),
                 (1, 2, -2, 0, 0, -1),
                 (0, 0, 0, 2, 2, 1),
                 (1, 2, 1, -1, -2, 0))),
         'P5': (((-1, 0, -2, 2, 2, -2),
                 (2, 0, -2, 2, 2, -2),
                 (0, 2, 1, 0, 2, 2),
                 (-2, -2, -2, -1, -2, -2),
                 (-1, 1, 0, -1, 2, 1)),
                ((1, 2, 1, -2, -2, 2), (0, -2, 0, -1, 0, 0)))}}


def random_member(rng: np.random.Generator, nfuncs: int = 5, scale: int = 2):
    return tuple(tuple(int(v) for v in rng.integers(-scale, scale + 1, 6)) for _ in range(nfuncs))


def p1_residual(case: str, sym) -> float:
    op, fam, _ = CASES[case]
    return strong_symmetry_residual(op(), fam(*sym), PROBE)


def p2_residual(case: str, pair) -> float:
    op, fam, _ = CASES[case]
    return symmetry_residual(op(), fam(*pair[0]) @ fam(*pair[1]), PROBE)


def p5_residual(case: str, data) -> float:
    op, fam, cl = CASES[case]
    sym, law = data
    return conservation_law_residual(fam(*sym), cl(*law), PROBE)


def search_witnesses(seed: int = 0, tries: int = 500) -> dict:
    """Scripted search for small integer family members violating P1, P2, P5."""
    rng = np.random.default_rng(seed)
    found = {}
    for case in CASES:
        out = {}
        for _ in range(tries):
            if "P1" not in out:
                s = random_member(rng)
                if p1_residual(case, s) > 0.1:
                    out["P1"] = s
            if "P2" not in out:
                pair = (random_member(rng), random_member(rng))
                if p2_residual(case, pair) > 0.01:
                    out["P2"] = pair
            if "P5" not in out:
                data = (random_member(rng), random_member(rng, 2))
                if p5_residual(case, data) > 0.01:
                    out["P5"] = data
            if len(out) == 3:
                break
        found[case] = out
    return found
