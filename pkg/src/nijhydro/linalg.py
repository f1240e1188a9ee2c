"""Small dense linear algebra at a single point.

Characteristic-polynomial coefficients use the convention

    det(lambda*Id - A) = lambda**n - sigma_1 lambda**(n-1) - ... - sigma_n,

so ``sigma[0]`` is the trace.  Arrays are indexed from zero: ``sigma[i-1]``
holds sigma_i and ``g[i-1]`` holds the coefficient of ``L**(n-i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CayleyHamiltonViolated, DoesNotCommute, NotGlRegular

#: |det K| / prod(column norms of K) below this counts as rank deficient.
CYCLIC_RTOL = 1e-10
COMMUTE_RTOL = 1e-8
CAYLEY_HAMILTON_RTOL = 1e-9


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _recursion(L: np.ndarray, sign: float = 1.0):
    """Faddeev-LeVerrier: sigma_i = tr(L A_{i-1}) / i, A_i = L A_{i-1} - sigma_i Id.

    Works on stacks of matrices.  Returns ``(sigma, A)`` with ``A`` of shape
    ``(..., n, n, n)`` holding A_0 ... A_{n-1} along axis -3.
    """
    n = L.shape[-1]
    eye = np.broadcast_to(np.eye(n), L.shape)
    sigma = np.zeros(L.shape[:-2] + (n,))
    A = np.zeros(L.shape[:-2] + (n, n, n))
    A[..., 0, :, :] = eye
    prev = eye
    for i in range(1, n + 1):
        LA = L @ prev
        s = np.trace(LA, axis1=-2, axis2=-1) / i
        sigma[..., i - 1] = s
        if i < n:
            prev = LA - sign * s[..., None, None] * eye
            A[..., i, :, :] = prev
    return sigma, A


def char_poly_sigma(A) -> np.ndarray:
    """Coefficients sigma_1..sigma_n of the characteristic polynomial."""
    A = _as_square(A)
    return _recursion(A)[0]


def char_poly_eval(sigma, lam):
    """lambda**n - sum sigma_i lambda**(n-i)."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[-1]
    out = lam**n
    for i in range(1, n + 1):
        out = out - sigma[..., i - 1] * lam ** (n - i)
    return out


def krylov(A, v) -> np.ndarray:
    """Matrix with columns v, Av, ..., A^{n-1} v."""
    A = _as_square(A)
    v = np.asarray(v, dtype=float)
    n = A.shape[-1]
    cols = [v]
    for _ in range(n - 1):
        cols.append(np.einsum("...ij,...j->...i", A, cols[-1]))
    return np.stack(cols, axis=-1)


def hadamard_ratio(K) -> np.ndarray:
    """|det K| divided by the product of the column norms (0 <= ratio <= 1)."""
    K = np.asarray(K, dtype=float)
    norms = np.prod(np.linalg.norm(K, axis=-2), axis=-1)
    det = np.abs(np.linalg.det(K))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(norms > 0, det / np.where(norms > 0, norms, 1.0), 0.0)
    return r


def _normalised(A, v):
    a = np.linalg.norm(A)
    A = A / a if a > 0 else A
    nv = np.linalg.norm(v)
    return A, (v / nv if nv > 0 else v)


def is_cyclic(A, v, rtol: float = CYCLIC_RTOL) -> bool:
    """True when v, Av, ..., A^{n-1}v span R^n.

    The test is scale invariant: A and v are normalised before forming the
    Krylov matrix, and its determinant is compared to the product of its
    column norms.
    """
    A = _as_square(A)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return False
    A, v = _normalised(A, v)
    return bool(hadamard_ratio(krylov(A, v)) > rtol)


@dataclass(frozen=True)
class CyclicSearch:
    found: bool
    witness: np.ndarray | None
    tried: int
    best_ratio: float

    def __bool__(self):
        return self.found


def _candidates(n: int, n_random: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        v = rng.standard_normal(n)
        yield v / np.linalg.norm(v)
    eye = np.eye(n)
    for i in range(n):
        yield eye[i]
    for i in range(n):
        for j in range(i + 1, n):
            yield eye[i] + eye[j]
    yield np.ones(n)


def is_gl_regular(A, n_random: int = 8, seed: int = 0, rtol: float = CYCLIC_RTOL) -> CyclicSearch:
    """Search for a cyclic vector: random unit vectors, then basis vectors and pair sums."""
    A = _as_square(A)
    n = A.shape[-1]
    best = 0.0
    tried = 0
    An, _ = _normalised(A, np.ones(n))
    for v in _candidates(n, n_random, seed):
        tried += 1
        r = float(hadamard_ratio(krylov(An, v / np.linalg.norm(v))))
        best = max(best, r)
        if r > rtol:
            return CyclicSearch(True, v, tried, best)
    return CyclicSearch(False, None, tried, best)


def cyclic_vector(A) -> np.ndarray:
    res = is_gl_regular(A)
    if not res.found:
        raise NotGlRegular(
            f"no cyclic vector found after {res.tried} candidates "
            f"(best Krylov Hadamard ratio {res.best_ratio:.3e}); operator is not gl-regular"
        )
    return res.witness


def powers(L, m: int) -> np.ndarray:
    """Stack Id, L, ..., L^{m-1} along axis -3."""
    L = np.asarray(L, dtype=float)
    n = L.shape[-1]
    out = np.empty(L.shape[:-2] + (m, n, n))
    out[..., 0, :, :] = np.eye(n)
    for k in range(1, m):
        out[..., k, :, :] = out[..., k - 1, :, :] @ L
    return out


def from_commutant_coeffs(L, g) -> np.ndarray:
    """sum_i g_i L^{n-i}."""
    L = np.asarray(L, dtype=float)
    g = np.asarray(g, dtype=float)
    n = L.shape[-1]
    P = powers(L, n)[..., ::-1, :, :]
    return np.einsum("...i,...iab->...ab", g, P)


def commutant_coeffs(L, M, tol: float = COMMUTE_RTOL, witness=None) -> np.ndarray:
    """Coefficients g with M = g_1 L^{n-1} + ... + g_n Id (single point).

    Solved on the Krylov basis of a cyclic vector v: sum g_i L^{n-i} v = M v.
    """
    L = _as_square(L)
    M = _as_square(M)
    scale = (1.0 + np.linalg.norm(L)) * (1.0 + np.linalg.norm(M))
    comm = np.linalg.norm(L @ M - M @ L)
    if comm > tol * scale:
        raise DoesNotCommute(f"||LM - ML|| = {comm:.3e} exceeds {tol * scale:.3e}")
    v = cyclic_vector(L) if witness is None else np.asarray(witness, dtype=float)
    # solve on c L so the Krylov columns stay O(1), then undo the scaling
    n = L.shape[0]
    c = 1.0 / max(float(np.max(np.abs(L))), np.finfo(float).tiny)
    K = krylov(c * L, v)[:, ::-1]
    g = np.linalg.solve(K, M @ v) * c ** np.arange(n - 1, -1, -1)
    recon = from_commutant_coeffs(L, g)
    pscale = (1.0 + np.linalg.norm(M)) * (1.0 + np.linalg.norm(L)) ** (L.shape[0] - 1)
    res = np.linalg.norm(recon - M)
    if res > tol * pscale:
        raise DoesNotCommute(
            f"M is not a polynomial in L: reconstruction residual {res:.3e}"
        )
    return g


def a_sequence(L, check: bool = True, _sign: float = 1.0):
    """A_0 = Id, A_i = L A_{i-1} - sigma_i Id, for i = 1..n-1.

    Returns ``(A, sigma)`` where ``A`` has shape ``(n, n, n)``.  With ``check``
    the Cayley-Hamilton closure L A_{n-1} = sigma_n Id is enforced.  ``_sign``
    exists only for mutation testing of the closure check.
    """
    L = _as_square(L)
    n = L.shape[-1]
    sigma, A = _recursion(L, _sign)
    if check:
        closure = L @ A[..., n - 1, :, :] - sigma[..., n - 1, None, None] * np.eye(n)
        res = np.max(np.abs(closure))
        scale = (1.0 + np.max(np.abs(L))) ** n
        if res > CAYLEY_HAMILTON_RTOL * scale:
            raise CayleyHamiltonViolated(
                f"Cayley-Hamilton closure |L A_(n-1) - sigma_n Id| = {res:.3e} "
                f"(tolerance {CAYLEY_HAMILTON_RTOL * scale:.3e})"
            )
    return A, sigma


def adjugate_identity_residual(L, lam) -> float:
    """max |sum_i lam^{n-1-i} A_i (lam Id - L) - chi(lam) Id| at one sample lambda."""
    L = _as_square(L)
    n = L.shape[-1]
    A, sigma = a_sequence(L, check=False)
    S = sum(lam ** (n - 1 - i) * A[i] for i in range(n))
    lhs = S @ (lam * np.eye(n) - L)
    return float(np.max(np.abs(lhs - char_poly_eval(sigma, lam) * np.eye(n))))
