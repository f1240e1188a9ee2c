"""Built-in property corpus run by ``nijhydro selftest``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import corpus
from .calculus import symmetry_residual, torsion
from .errors import CayleyHamiltonViolated, NijHydroError
from .fields import BlockSpec, Diagonal1, JordanToeplitz, ScalarField, make_companion_second, make_toeplitz
from .hierarchy import chain_residual, generic_hierarchy, standard_hierarchy
from .hydro import a_sequence_field
from .jets import exponential, identity, polynomial, sine
from .jordan import jordan_symmetry
from .linalg import a_sequence, commutant_coeffs, from_commutant_coeffs

INJECTIONS = ("rec-sign",)


@dataclass(frozen=True)
class Item:
    name: str
    ok: bool
    detail: str


def _family_symmetries(rng) -> Item:
    worst = 0.0
    for case, (op, fam, _) in corpus.CASES.items():
        pts = rng.uniform(0.5, 1.5, (20, 3))
        for _ in range(3):
            worst = max(worst, symmetry_residual(op(), fam(*corpus.random_member(rng)), pts))
    return Item("counterexample symmetry families", worst < 1e-9, f"max residual {worst:.2e}")


def _witnesses(rng) -> list[Item]:
    out = []
    for case in corpus.CASES:
        w = corpus.PINNED[case]
        r1 = corpus.p1_residual(case, w["P1"])
        r2 = corpus.p2_residual(case, w["P2"])
        r5 = corpus.p5_residual(case, w["P5"])
        out.append(Item(f"{case}: symmetry that is not strong", r1 > 0.1, f"strong residual {r1:.3g}"))
        out.append(Item(f"{case}: product of symmetries not a symmetry", r2 > 0.01, f"residual {r2:.3g}"))
        out.append(Item(f"{case}: M^* df not closed", r5 > 0.01, f"residual {r5:.3g}"))
    return out


def _jordan_round_trip(rng) -> Item:
    worst = 0.0
    hs = [exponential(0.5), sine(1.3), polynomial([0.2, -1.0, 0.5]), identity(), exponential(-0.3)]
    for k in (2, 3, 4):
        u = rng.uniform(0.5, 1.5, k)
        fs = [hs[(i + k) % len(hs)] for i in range(k)]
        M = jordan_symmetry(fs, u)
        U = make_toeplitz(k).value(u)
        g = commutant_coeffs(U, M)
        worst = max(worst, float(np.max(np.abs(from_commutant_coeffs(U, g) - M))))
    return Item("Jordan symmetry round trip", worst < 1e-8, f"max defect {worst:.2e}")


def _companion_images(rng) -> Item:
    worst = 0.0
    for n in (2, 3, 4, 5):
        coeffs = rng.uniform(-1, 1, (n, n + 1))
        sig = [ScalarField(n, (lambda c: lambda u: (u @ c[:-1] + c[-1], np.broadcast_to(c[:-1], u.shape),
                                                    np.zeros(u.shape + (n,))))(coeffs[i]), None, f"s{i}")
               for i in range(n)]
        L = make_companion_second(sig)
        u = rng.uniform(-1, 1, n)
        A, _, _, _ = a_sequence_field(L, u)
        for i in range(n):
            worst = max(worst, float(np.max(np.abs(A[i][:, n - 1] - np.eye(n)[n - 1 - i]))))
    return Item("A_i e_n = e_(n-i) for the second companion form", worst < 1e-12, f"max defect {worst:.2e}")


def _cayley_hamilton(rng, inject: str | None) -> Item:
    sign = -1.0 if inject == "rec-sign" else 1.0
    worst = 0.0
    try:
        for n in (2, 3, 4, 5, 6):
            L = rng.uniform(-1, 1, (n, n))
            A, sigma = a_sequence(L, check=True, _sign=sign)
            closure = L @ A[n - 1] - sigma[n - 1] * np.eye(n)
            worst = max(worst, float(np.max(np.abs(closure))))
    except CayleyHamiltonViolated as exc:
        return Item("Cayley-Hamilton closure", False, str(exc))
    return Item("Cayley-Hamilton closure", worst < 1e-10, f"max closure {worst:.2e}")


def _hierarchy_chains(rng) -> Item:
    worst = 0.0
    for spec in (BlockSpec([Diagonal1(identity()) for _ in range(4)]),
                 BlockSpec([JordanToeplitz(2), JordanToeplitz(2)]),
                 BlockSpec([JordanToeplitz(2), Diagonal1(exponential(1.0))])):
        L = spec.operator()
        pts = rng.uniform(0.5, 1.5, (10, spec.n))
        worst = max(worst, chain_residual(L, standard_hierarchy(spec), pts))
    spec = BlockSpec([JordanToeplitz(3)])
    H = generic_hierarchy(spec, base=np.array([0.4, 1.0, 1.5]))
    worst = max(worst, chain_residual(spec.operator(), H, rng.uniform(0.5, 1.5, (5, 3))))
    return Item("hierarchy chains L^* df_i = df_(i+1)", worst < 1e-10, f"max residual {worst:.2e}")


def _toeplitz_torsion(rng) -> Item:
    worst = 0.0
    for k in (2, 3, 4, 5):
        worst = max(worst, float(np.max(np.abs(torsion(make_toeplitz(k), rng.uniform(-2, 2, (10, k)))))))
    return Item("Toeplitz forms are Nijenhuis", worst < 1e-12, f"max torsion {worst:.2e}")


def run(seed: int = 0, inject: str | None = None) -> list[Item]:
    rng = np.random.default_rng(seed)
    steps: list[Callable[[], Item | list[Item]]] = [
        lambda: _family_symmetries(rng),
        lambda: _witnesses(rng),
        lambda: _jordan_round_trip(rng),
        lambda: _companion_images(rng),
        lambda: _cayley_hamilton(rng, inject),
        lambda: _hierarchy_chains(rng),
        lambda: _toeplitz_torsion(rng),
    ]
    items: list[Item] = []
    for step in steps:
        try:
            r = step()
        except NijHydroError as exc:
            r = Item(getattr(step, "__name__", "check"), False, f"{type(exc).__name__}: {exc}")
        items.extend(r if isinstance(r, list) else [r])
    return items
