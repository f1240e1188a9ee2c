"""JSON run configurations.  Unknown keys are rejected at every level."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .expr import compile_expr, jet_function
from .fields import (
    BlockSpec,
    Box,
    Curve,
    Diagonal1,
    JordanToeplitz,
    OperatorField,
    ScalarField,
    operator_from_dual,
    scalar_from_dual,
)

TOP_KEYS = {"name", "operator", "curve", "hierarchy", "grids", "tolerances", "output", "seed", "verify"}
TOLERANCE_KEYS = {"pass", "fail", "newton", "quadrature", "closed"}
DEFAULT_TOLERANCES = {"pass": 1e-8, "fail": 1e-2, "newton": 1e-11, "quadrature": 1e-10, "closed": 1e-7}
CHECKS = {"torsion", "symmetry", "strong_symmetry", "conservation_law"}


def _keys(obj: Any, allowed: set, where: str, required: set = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(unknown))}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(sorted(missing))}")
    return obj


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    return float(v)


def _count(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{where}: expected a positive integer")
    return v


@dataclass(frozen=True)
class OperatorConfig:
    """Either a block spec or an explicit matrix of expressions."""

    spec: BlockSpec | None
    variables: tuple = ()
    matrix: tuple = ()
    box: tuple | None = None

    @property
    def n(self) -> int:
        return self.spec.n if self.spec is not None else len(self.variables)

    def field(self) -> OperatorField:
        if self.spec is not None:
            return self.spec.operator()
        return matrix_field(self.matrix, self.variables)

    def default_variables(self) -> tuple:
        return self.variables or tuple(f"u{i + 1}" for i in range(self.n))


def matrix_field(matrix, variables) -> OperatorField:
    entries = [[compile_expr(e, variables) for e in row] for row in matrix]
    n = len(variables)
    return operator_from_dual(lambda xs: [[e(xs) for e in row] for row in entries], n, name="L")


def scalar_field(text: str, variables) -> ScalarField:
    f = compile_expr(text, variables)
    return scalar_from_dual(f, len(variables), name=text)


def _parse_operator(obj) -> OperatorConfig:
    o = _keys(obj, {"blocks", "variables", "matrix", "box"}, "operator")
    box = None
    if "box" in o:
        try:
            box = tuple((float(a), float(b)) for a, b in o["box"])
        except (TypeError, ValueError):
            raise ConfigError("operator.box: expected [[lo, hi], ...]") from None
    if "blocks" in o:
        if "matrix" in o:
            raise ConfigError("operator: give either blocks or matrix, not both")
        blocks = []
        for i, b in enumerate(o["blocks"]):
            bb = _keys(b, {"type", "eigenvalue", "size"}, f"operator.blocks[{i}]", {"type"})
            if bb["type"] == "diagonal":
                blocks.append(Diagonal1(jet_function(bb.get("eigenvalue", "u"), "u")))
            elif bb["type"] == "jordan":
                blocks.append(JordanToeplitz(_count(bb.get("size"), f"operator.blocks[{i}].size")))
            else:
                raise ConfigError(f"operator.blocks[{i}].type must be 'diagonal' or 'jordan'")
        if not blocks:
            raise ConfigError("operator.blocks: at least one block required")
        spec = BlockSpec(blocks)
        if box is not None and len(box) != spec.n:
            raise ConfigError("operator.box: one interval per coordinate required")
        return OperatorConfig(spec, box=box)
    if "matrix" not in o:
        raise ConfigError("operator: blocks or matrix required")
    variables = tuple(o.get("variables") or ())
    matrix = tuple(tuple(r) for r in o["matrix"])
    n = len(matrix)
    if not variables:
        variables = tuple(f"u{i + 1}" for i in range(n))
    if len(variables) != n or any(len(r) != n for r in matrix):
        raise ConfigError("operator.matrix must be square with one variable per coordinate")
    for row in matrix:
        for e in row:
            compile_expr(e, variables)
    if box is not None and len(box) != n:
        raise ConfigError("operator.box: one interval per coordinate required")
    return OperatorConfig(None, variables, matrix, box)


@dataclass(frozen=True)
class CurveConfig:
    components: tuple
    domain: tuple
    order: int = 3
    x0: float = 0.0

    def curve(self) -> Curve:
        return Curve([jet_function(c, "x") for c in self.components], self.domain, self.order)


def _parse_curve(obj, n: int) -> CurveConfig:
    c = _keys(obj, {"components", "domain", "order", "x0"}, "curve", {"components", "domain"})
    comps = tuple(c["components"])
    if len(comps) != n:
        raise ConfigError(f"curve: {n} components required, got {len(comps)}")
    for e in comps:
        compile_expr(e, ["x"])
    try:
        a, b = (float(v) for v in c["domain"])
    except (TypeError, ValueError):
        raise ConfigError("curve.domain: expected [a, b]") from None
    if not a < b:
        raise ConfigError("curve.domain: need a < b")
    x0 = _number(c.get("x0", 0.0), "curve.x0")
    if not a <= x0 <= b:
        raise ConfigError("curve.x0 must lie in the curve domain")
    return CurveConfig(comps, (a, b), _count(c.get("order", 3), "curve.order"), x0)


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def nodes(self) -> np.ndarray:
        if self.count == 1:
            return np.array([0.5 * (self.lo + self.hi)])
        return np.linspace(self.lo, self.hi, self.count)


def _parse_axis(obj, where: str) -> Axis:
    a = _keys(obj, {"min", "max", "count"}, where, {"min", "max", "count"})
    lo, hi = _number(a["min"], f"{where}.min"), _number(a["max"], f"{where}.max")
    if hi < lo:
        raise ConfigError(f"{where}: max < min")
    return Axis(lo, hi, _count(a["count"], f"{where}.count"))


@dataclass(frozen=True)
class Expectation:
    check: str
    expect: str
    matrix: tuple = ()
    f: str = ""
    label: str = ""


@dataclass(frozen=True)
class VerifyConfig:
    probes: int
    expectations: tuple


def _parse_verify(obj, n: int, variables) -> VerifyConfig:
    v = _keys(obj, {"probes", "expect"}, "verify", {"expect"})
    out = []
    for i, e in enumerate(v["expect"]):
        where = f"verify.expect[{i}]"
        ee = _keys(e, {"check", "expect", "M", "f", "label"}, where, {"check", "expect"})
        if ee["check"] not in CHECKS:
            raise ConfigError(f"{where}.check must be one of {', '.join(sorted(CHECKS))}")
        if ee["expect"] not in ("pass", "fail"):
            raise ConfigError(f"{where}.expect must be 'pass' or 'fail'")
        matrix = ()
        if ee["check"] in ("symmetry", "strong_symmetry"):
            if "M" not in ee:
                raise ConfigError(f"{where}: M required for {ee['check']}")
            matrix = tuple(tuple(r) for r in ee["M"])
            if len(matrix) != n or any(len(r) != n for r in matrix):
                raise ConfigError(f"{where}.M must be {n}x{n}")
            for row in matrix:
                for x in row:
                    compile_expr(x, variables)
        f = ""
        if ee["check"] == "conservation_law":
            if "f" not in ee:
                raise ConfigError(f"{where}: f required for conservation_law")
            f = ee["f"]
            compile_expr(f, variables)
        out.append(Expectation(ee["check"], ee["expect"], matrix, f, ee.get("label", ee["check"])))
    return VerifyConfig(_count(v.get("probes", 20), "verify.probes"), tuple(out))


@dataclass(frozen=True)
class RunConfig:
    name: str
    operator: OperatorConfig
    curve: CurveConfig | None
    hierarchy: str
    x_axis: Axis | None
    t_axes: tuple
    tolerances: dict
    output: str | None
    seed: int
    verify: VerifyConfig | None
    source: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.operator.n

    def probe_box(self) -> Box:
        n = self.n
        if self.operator.box is not None:
            lo = np.array([a for a, _ in self.operator.box])
            hi = np.array([b for _, b in self.operator.box])
        else:
            lo, hi = np.full(n, 0.5), np.full(n, 2.0)
        return Box(lo, hi)


def parse_config(data: dict) -> RunConfig:
    top = _keys(data, TOP_KEYS, "config", {"operator"})
    op = _parse_operator(top["operator"])
    n = op.n
    variables = op.default_variables()
    curve = _parse_curve(top["curve"], n) if "curve" in top else None
    hier = top.get("hierarchy", "standard")
    if isinstance(hier, dict):
        h = _keys(hier, {"seed"}, "hierarchy", {"seed"})
        compile_expr(h["seed"], variables)
        hier = "seed:" + h["seed"]
    elif hier != "standard":
        raise ConfigError("hierarchy must be 'standard' or {\"seed\": expression}")
    x_axis, t_axes = None, ()
    if "grids" in top:
        g = _keys(top["grids"], {"x", "t"}, "grids", {"x", "t"})
        x_axis = _parse_axis(g["x"], "grids.x")
        t = g["t"]
        if isinstance(t, list):
            if len(t) != n - 1:
                raise ConfigError(f"grids.t: {n - 1} axes required")
            t_axes = tuple(_parse_axis(a, f"grids.t[{i}]") for i, a in enumerate(t))
        else:
            t_axes = tuple(_parse_axis(t, "grids.t") for _ in range(n - 1))
    tol = dict(DEFAULT_TOLERANCES)
    if "tolerances" in top:
        for k, v in _keys(top["tolerances"], TOLERANCE_KEYS, "tolerances").items():
            tol[k] = _number(v, f"tolerances.{k}")
    output = None
    if "output" in top:
        output = _keys(top["output"], {"dir"}, "output").get("dir")
    seed = top.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    verify = _parse_verify(top["verify"], n, variables) if "verify" in top else None
    name = top.get("name", "run")
    if not isinstance(name, str):
        raise ConfigError("name must be a string")
    return RunConfig(name, op, curve, hier, x_axis, t_axes, tol, output, seed, verify, data)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return parse_config(data)
