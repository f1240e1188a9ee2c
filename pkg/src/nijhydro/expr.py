"""A tiny expression language: numbers, named variables, + - * / ^, unary
minus, and exp, log, sin, cos, sqrt.  Expressions compile to closures that work
on floats, numpy arrays, Jet1D and Dual2 values alike."""

from __future__ import annotations

import ast
import math
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .jets import JetFunction

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


def _apply(name: str, v):
    method = getattr(v, name, None)
    if method is not None and not isinstance(v, np.ndarray):
        return method()
    return getattr(np, name)(v)


def _compile(node, variables: dict[str, int]):
    if isinstance(node, ast.Expression):
        return _compile(node.body, variables)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        c = float(node.value)
        return lambda xs: c
    if isinstance(node, ast.Name):
        if node.id in variables:
            i = variables[node.id]
            return lambda xs: xs[i]
        if node.id in CONSTANTS:
            c = CONSTANTS[node.id]
            return lambda xs: c
        raise ConfigError(f"unknown name {node.id!r} (variables: {', '.join(variables) or 'none'})")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left, variables), _compile(node.right, variables)
        if isinstance(node.op, ast.Pow) and isinstance(node.right, ast.Constant):
            p = float(node.right.value)
            if p.is_integer() and p >= 0:
                k = int(p)

                def ipow(xs):
                    base = left(xs)
                    out = 1.0
                    for _ in range(k):
                        out = base * out
                    return out

                return ipow
        return lambda xs: op(left(xs), right(xs))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, variables)
        if isinstance(node.op, ast.USub):
            return lambda xs: -inner(xs)
        return inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        if node.func.id not in FUNCTIONS:
            raise ConfigError(f"unknown function {node.func.id!r} (allowed: {', '.join(FUNCTIONS)})")
        if len(node.args) != 1:
            raise ConfigError(f"{node.func.id} takes exactly one argument")
        arg = _compile(node.args[0], variables)
        name = node.func.id
        return lambda xs: _apply(name, arg(xs))
    raise ConfigError(f"unsupported syntax in expression: {ast.dump(node)[:60]}")


def compile_expr(text: str, variables: Sequence[str]) -> Callable[[list], object]:
    """Compile ``text``; the result maps a list of variable values to a value."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("expression must be a non-empty string")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"malformed expression {text!r}: {exc.msg}") from None
    return _compile(tree, {v: i for i, v in enumerate(variables)})


def jet_function(text: str, var: str = "x") -> JetFunction:
    """One-variable expression as a jet function."""
    f = compile_expr(text, [var])
    return JetFunction(lambda t: f([t]), name=text)


def evaluate(text: str, variables: Sequence[str], values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    f = compile_expr(text, variables)
    return np.asarray(f([values[..., i] for i in range(values.shape[-1])]), dtype=float)
