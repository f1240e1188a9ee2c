"""Truncated Taylor arithmetic.

Two number-like classes live here:

* :class:`Jet1D` -- value and derivatives up to a fixed order of a function of
  one variable at a base point.  Coefficients are stored normalised
  (``c[k] = f^(k)(base) / k!``) so that products are Cauchy products and
  composition is truncated series substitution.
* :class:`Dual2` -- value, gradient and Hessian of a function of several
  variables (second-order forward mode).

Both are vectorised over leading axes.  A *jet function* is any callable
``f(s, order) -> array`` returning ``[f(s), f'(s), ..., f^(order)(s)]`` along a
new trailing axis; :class:`JetFunction` builds one from ordinary Python code
written against :class:`Jet1D`.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import EvaluationError

__all__ = [
    "Jet1D",
    "Dual2",
    "JetFunction",
    "series_mul",
    "series_compose",
    "outer_taylor",
    "constant",
    "identity",
    "polynomial",
    "exponential",
    "sine",
    "jet_shift",
]


def _factorials(m: int) -> np.ndarray:
    return np.array([math.factorial(k) for k in range(m + 1)], dtype=float)


def series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated Cauchy product along the last axis (length = common order + 1)."""
    m = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for i in range(m):
        out[..., i:] += a[..., i : i + 1] * b[..., : m - i]
    return out


def series_compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Substitute ``inner`` (zero constant term) into the series ``outer``.

    ``outer`` holds normalised Taylor coefficients of the outer function at the
    inner series' constant term, so the result is the Taylor expansion of the
    composite (Faa di Bruno via Horner).
    """
    m = inner.shape[-1]
    q = np.array(inner, dtype=float, copy=True)
    q[..., 0] = 0.0
    shape = np.broadcast_shapes(outer.shape[:-1] + (m,), q.shape)
    out = np.zeros(shape)
    for k in range(outer.shape[-1] - 1, -1, -1):
        out = series_mul(out, q)
        out[..., 0] += outer[..., k]
    return out


def outer_taylor(name: str, a0: np.ndarray, m: int, p: float | None = None) -> np.ndarray:
    """Normalised Taylor coefficients of an elementary function at ``a0``."""
    a0 = np.asarray(a0, dtype=float)
    ks = np.arange(m + 1)
    fact = _factorials(m)
    if name == "exp":
        d = np.exp(a0)[..., None] * np.ones(m + 1)
    elif name == "log":
        if np.any(a0 <= 0):
            raise EvaluationError("log of a non-positive value")
        d = np.empty(a0.shape + (m + 1,))
        d[..., 0] = np.log(a0)
        for k in range(1, m + 1):
            d[..., k] = (-1.0) ** (k - 1) * math.factorial(k - 1) / a0**k
    elif name == "sin":
        phases = [np.sin(a0), np.cos(a0), -np.sin(a0), -np.cos(a0)]
        d = np.stack([phases[k % 4] for k in ks], axis=-1)
    elif name == "cos":
        phases = [np.cos(a0), -np.sin(a0), -np.cos(a0), np.sin(a0)]
        d = np.stack([phases[k % 4] for k in ks], axis=-1)
    elif name == "pow":
        assert p is not None
        d = np.empty(a0.shape + (m + 1,))
        coef = 1.0
        for k in range(m + 1):
            expo = p - k
            if float(p).is_integer() and p >= 0 and k > p:
                d[..., k] = 0.0
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    d[..., k] = coef * np.power(a0, expo)
            coef *= p - k
    else:
        raise ValueError(f"unknown elementary function {name!r}")
    return d / fact


class Jet1D:
    """Truncated Taylor expansion of a one-variable function at ``base``."""

    __array_priority__ = 1000
    __slots__ = ("coeffs", "base")

    def __init__(self, coeffs, base=None):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.base = base

    @classmethod
    def variable(cls, base, order: int) -> "Jet1D":
        base = np.asarray(base, dtype=float)
        c = np.zeros(base.shape + (order + 1,))
        c[..., 0] = base
        if order >= 1:
            c[..., 1] = 1.0
        return cls(c, base)

    @classmethod
    def from_derivatives(cls, derivs, base=None) -> "Jet1D":
        derivs = np.asarray(derivs, dtype=float)
        return cls(derivs / _factorials(derivs.shape[-1] - 1), base)

    @property
    def order(self) -> int:
        return self.coeffs.shape[-1] - 1

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def derivatives(self) -> np.ndarray:
        return self.coeffs * _factorials(self.order)

    def _lift(self, other) -> np.ndarray:
        if isinstance(other, Jet1D):
            return other.coeffs
        c = np.zeros(np.shape(other) + (self.order + 1,))
        c[..., 0] = other
        return c

    def __add__(self, other):
        return Jet1D(self.coeffs + self._lift(other), self.base)

    __radd__ = __add__

    def __neg__(self):
        return Jet1D(-self.coeffs, self.base)

    def __sub__(self, other):
        return Jet1D(self.coeffs - self._lift(other), self.base)

    def __rsub__(self, other):
        return Jet1D(self._lift(other) - self.coeffs, self.base)

    def __mul__(self, other):
        if isinstance(other, Jet1D):
            return Jet1D(series_mul(self.coeffs, other.coeffs), self.base)
        return Jet1D(self.coeffs * np.asarray(other, dtype=float)[..., None], self.base)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet1D":
        return self._apply("pow", p=-1.0)

    def __truediv__(self, other):
        if isinstance(other, Jet1D):
            return self * other.reciprocal()
        return Jet1D(self.coeffs / np.asarray(other, dtype=float)[..., None], self.base)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet1D):
            return (self.log() * p).exp()
        p = float(p)
        if p.is_integer() and 0 <= p <= 8:
            out = Jet1D(self._lift(1.0), self.base)
            for _ in range(int(p)):
                out = out * self
            return out
        return self._apply("pow", p=p)

    def __rpow__(self, b):
        return (self * math.log(b)).exp()

    def _apply(self, name: str, p: float | None = None) -> "Jet1D":
        outer = outer_taylor(name, self.coeffs[..., 0], self.order, p)
        return Jet1D(series_compose(outer, self.coeffs), self.base)

    def exp(self):
        return self._apply("exp")

    def log(self):
        return self._apply("log")

    def sin(self):
        return self._apply("sin")

    def cos(self):
        return self._apply("cos")

    def sqrt(self):
        return self._apply("pow", p=0.5)

    def compose(self, outer_derivs: np.ndarray) -> "Jet1D":
        """Jet of ``h(self)`` given derivatives of ``h`` at ``self.value``."""
        outer = np.asarray(outer_derivs, dtype=float) / _factorials(outer_derivs.shape[-1] - 1)
        return Jet1D(series_compose(outer, self.coeffs), self.base)

    def __repr__(self):
        return f"Jet1D(derivatives={self.derivatives()!r})"


class Dual2:
    """Value, gradient and Hessian of a multivariate function (vectorised)."""

    __array_priority__ = 1000
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = np.asarray(val, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @classmethod
    def variables(cls, u) -> list["Dual2"]:
        u = np.asarray(u, dtype=float)
        n = u.shape[-1]
        eye = np.eye(n)
        zero_h = np.zeros(u.shape[:-1] + (n, n))
        return [cls(u[..., i], np.broadcast_to(eye[i], u.shape), zero_h) for i in range(n)]

    def _lift(self, other) -> "Dual2":
        if isinstance(other, Dual2):
            return other
        other = np.asarray(other, dtype=float)
        return Dual2(other, np.zeros(other.shape + self.grad.shape[-1:]),
                     np.zeros(other.shape + self.hess.shape[-2:]))

    def __add__(self, other):
        o = self._lift(other)
        return Dual2(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Dual2(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Dual2):
            c = np.asarray(other, dtype=float)
            return Dual2(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])
        a, b = self, other
        ga, gb = a.grad, b.grad
        outer = ga[..., :, None] * gb[..., None, :]
        return Dual2(
            a.val * b.val,
            a.val[..., None] * gb + b.val[..., None] * ga,
            a.val[..., None, None] * b.hess + b.val[..., None, None] * a.hess
            + outer + np.swapaxes(outer, -1, -2),
        )

    __rmul__ = __mul__

    def _chain(self, d0, d1, d2) -> "Dual2":
        g = self.grad
        return Dual2(
            d0,
            d1[..., None] * g,
            d2[..., None, None] * (g[..., :, None] * g[..., None, :])
            + d1[..., None, None] * self.hess,
        )

    def _apply(self, name, p=None):
        d = outer_taylor(name, self.val, 2, p) * np.array([1.0, 1.0, 2.0])
        return self._chain(d[..., 0], d[..., 1], d[..., 2])

    def reciprocal(self):
        return self._apply("pow", p=-1.0)

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Dual2):
            return (self.log() * p).exp()
        p = float(p)
        if p.is_integer() and 0 <= p <= 8:
            out = self._lift(np.ones_like(self.val))
            for _ in range(int(p)):
                out = out * self
            return out
        return self._apply("pow", p=p)

    def __rpow__(self, b):
        return (self * math.log(b)).exp()

    def exp(self):
        return self._apply("exp")

    def log(self):
        return self._apply("log")

    def sin(self):
        return self._apply("sin")

    def cos(self):
        return self._apply("cos")

    def sqrt(self):
        return self._apply("pow", p=0.5)


class JetFunction:
    """A one-variable function usable wherever a jet function is expected.

    ``fn`` receives a :class:`Jet1D` and returns a :class:`Jet1D` (or a plain
    number, treated as a constant).  Calling the object with ``(s, order)``
    returns the derivative stack ``[f, f', ..., f^(order)]`` at ``s``.
    """

    def __init__(self, fn: Callable, name: str | None = None):
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "f")

    def __call__(self, s, order: int = 0) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = self.fn(Jet1D.variable(s, order))
        if not isinstance(out, Jet1D):
            c = np.zeros(s.shape + (order + 1,))
            c[..., 0] = out
            return c
        d = out.derivatives()
        return np.broadcast_to(d, s.shape + (order + 1,)).copy()

    def __repr__(self):
        return f"JetFunction({self.name})"


def constant(c: float) -> JetFunction:
    return JetFunction(lambda t: 0.0 * t + c, name=f"const({c})")


def identity() -> JetFunction:
    return JetFunction(lambda t: t, name="id")


def polynomial(coeffs) -> JetFunction:
    """``coeffs[k]`` multiplies ``s**k``."""
    coeffs = list(coeffs)

    def p(t):
        out = 0.0 * t
        for c in reversed(coeffs):
            out = out * t + c
        return out

    return JetFunction(p, name=f"poly{tuple(coeffs)}")


def exponential(rate: float = 1.0) -> JetFunction:
    return JetFunction(lambda t: (t * rate).exp(), name=f"exp({rate}s)")


def sine(freq: float = 1.0) -> JetFunction:
    return JetFunction(lambda t: (t * freq).sin(), name=f"sin({freq}s)")


def jet_shift(f, k: int = 1):
    """Jet function of the k-th derivative of ``f``."""

    def g(s, order=0):
        return f(s, order + k)[..., k:]

    return g
