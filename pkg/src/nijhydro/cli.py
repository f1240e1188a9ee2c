"""nijhydro command line: verify | solve | hierarchy | selftest."""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import selftest
from .calculus import (
    conservation_law_residual,
    residual_scale,
    strong_symmetry_residual,
    symmetry_residual,
    torsion,
)
from .config import RunConfig, load_config, matrix_field, scalar_field
from .errors import ConfigError, DoesNotCommute, NijHydroError
from .hierarchy import (
    chain_residual,
    companion_correspondence_check,
    hierarchy_from_seed,
    is_regular_hierarchy,
    standard_hierarchy,
)
from .hydro import hydro_residual
from .solver import Pipeline

USAGE = "nijhydro {verify,solve,hierarchy,selftest} [--config PATH] [--seed N] [--out DIR]"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _probes(cfg: RunConfig, seed: int, count: int) -> np.ndarray:
    return cfg.probe_box().sample(np.random.default_rng(seed), count)


def _out_dir(cfg: RunConfig, out: str | None) -> Path:
    d = Path(out or cfg.output or f"nijhydro-{cfg.name}")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _hierarchy(cfg: RunConfig, L, base):
    if cfg.hierarchy == "standard":
        if cfg.operator.spec is None:
            raise ConfigError("hierarchy 'standard' needs a block operator; give {\"seed\": ...}")
        return standard_hierarchy(cfg.operator.spec, base)
    f = scalar_field(cfg.hierarchy[len("seed:"):], cfg.operator.default_variables())
    return hierarchy_from_seed(L, f, base)


def cmd_verify(cfg: RunConfig, seed: int, out=None) -> int:
    out = out or sys.stdout
    if cfg.verify is None:
        raise ConfigError("verify: config has no 'verify' section")
    L = cfg.operator.field()
    variables = cfg.operator.default_variables()
    pts = _probes(cfg, seed, cfg.verify.probes)
    tol_pass, tol_fail = cfg.tolerances["pass"], cfg.tolerances["fail"]
    print(f"{'check':<28}{'residual':>14}{'threshold':>14}  expected  observed  verdict", file=out)
    all_ok = True
    for e in cfg.verify.expectations:
        M = matrix_field(e.matrix, variables) if e.matrix else None
        try:
            if e.check == "torsion":
                res = float(np.max(np.abs(torsion(L, pts))))
                scale = residual_scale(L, None, pts)
            elif e.check == "conservation_law":
                res = conservation_law_residual(L, scalar_field(e.f, variables), pts)
                scale = residual_scale(L, None, pts)
            else:
                fn = symmetry_residual if e.check == "symmetry" else strong_symmetry_residual
                res = fn(L, M, pts)
                scale = residual_scale(L, M, pts)
        except DoesNotCommute:
            res, scale = float("inf"), 1.0
        thr = tol_pass * scale if e.expect == "pass" else tol_fail
        observed = "pass" if res <= tol_pass * scale else ("fail" if res > tol_fail else "unclear")
        ok = observed == e.expect
        all_ok &= ok
        print(f"{e.label:<28}{res:>14.3e}{thr:>14.3e}  {e.expect:<8}  {observed:<8}  {'ok' if ok else 'MISMATCH'}",
              file=out)
    return EXIT_OK if all_ok else EXIT_FAIL


def build_pipeline(cfg: RunConfig) -> Pipeline:
    if cfg.operator.spec is None or cfg.curve is None:
        raise ConfigError("solve needs a block operator and a curve")
    spec = cfg.operator.spec
    curve = cfg.curve.curve()
    L = spec.operator()
    H = _hierarchy(cfg, L, curve(cfg.curve.x0))
    return Pipeline(spec, L, H, curve, cfg.curve.x0)


def cmd_solve(cfg: RunConfig, seed: int, out_dir: str | None, out=None) -> int:
    out = out or sys.stdout
    if cfg.x_axis is None:
        raise ConfigError("solve: config has no 'grids' section")
    t0 = time.perf_counter()
    P = build_pipeline(cfg)
    try:
        P.run()
    except NijHydroError as exc:
        print(f"pipeline (extraction / symmetry extension / g-hierarchy) failed: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_FAIL
    P.G.tol = cfg.tolerances["quadrature"]
    x = cfg.x_axis.nodes()
    ts = [a.nodes() for a in cfg.t_axes]
    grid = P.solve(x, ts)
    n = P.L.n
    d = _out_dir(cfg, out_dir)
    with open(d / "solution.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"t{i}" for i in range(1, n)] + ["x"] + [f"u{i}" for i in range(1, n + 1)] + ["converged"])
        for t, xv, u, ok in grid.rows():
            w.writerow([_fmt(v) for v in t] + [_fmt(xv)] + [_fmt(v) for v in u] + [int(ok)])
    res = None
    if grid.all_converged() and all(len(a) >= 3 for a in grid.axes):
        res = hydro_residual(grid, P.L)
        with open(d / "residuals.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["equation", "residual"])
            for i, r in enumerate(res.residuals, start=1):
                w.writerow([f"u_t{i} = A{i} u_x", _fmt(r)])
    else:
        with open(d / "residuals.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["equation", "residual"])
    on_curve = P.G.on_curve_defects(P.curve, np.linspace(*P.curve.domain, 9)[1:-1], P.x0)
    lines = [
        f"run: {cfg.name}",
        f"nodes: {grid.converged.size}, converged: {int(grid.converged.sum())}",
        "tolerances: " + ", ".join(f"{k}={v:g}" for k, v in sorted(cfg.tolerances.items())),
        f"extraction samples: {P.data.samples}, table consistency: {P.data.consistency:.3e}",
        f"hierarchy matrix max condition number on curve: {P.conditions['hierarchy_max_cond']:.3e}",
        f"Krylov residual on curve: {P.conditions['krylov_residual']:.3e}",
        f"on-curve defects: g values {on_curve[0]:.3e}, d/dx g {on_curve[1]:.3e}",
        "hydro residuals: " + (", ".join(f"{r:.3e}" for r in res.residuals) if res is not None else "n/a"),
        "timings (s): " + ", ".join(f"{k}={v:.3f}" for k, v in P.timings.items())
        + f", total={time.perf_counter() - t0:.3f}",
    ]
    (d / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines), file=out)
    if not grid.all_converged():
        print(f"{grid.converged.size - int(grid.converged.sum())} node(s) did not converge "
              "(Newton on the g-system); see solution.csv", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_hierarchy(cfg: RunConfig, seed: int, out_dir: str | None, out=None) -> int:
    out = out or sys.stdout
    L = cfg.operator.field()
    n = cfg.n
    base = cfg.curve.curve()(cfg.curve.x0) if cfg.curve is not None else cfg.probe_box().sample(
        np.random.default_rng(seed), 1)[0]
    H = _hierarchy(cfg, L, base)
    pts = _probes(cfg, seed, 10)
    chain = chain_residual(L, H, pts)
    regular = np.atleast_1d(is_regular_hierarchy(H, pts))
    rep = companion_correspondence_check(L, H, base)
    lines = [f"chain residual |L^* df_i - df_(i+1)|: {chain:.3e}",
             f"regular at {int(regular.sum())}/{regular.size} probe points",
             str(rep)]
    d = _out_dir(cfg, out_dir)
    with open(d / "hierarchy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"u{i}" for i in range(1, n + 1)] + [f"f{i}" for i in range(1, n + 1)])
        vals = np.stack([f.value(pts) for f in H.potentials], axis=-1)
        for p, v in zip(pts, vals):
            w.writerow([_fmt(a) for a in p] + [_fmt(a) for a in v])
    print("\n".join(lines), file=out)
    return EXIT_OK if chain < cfg.tolerances["pass"] * residual_scale(L, None, pts) else EXIT_FAIL


def cmd_selftest(seed: int, inject: str | None, out=None) -> int:
    out = out or sys.stdout
    items = selftest.run(seed, inject)
    for it in items:
        print(f"[{'PASS' if it.ok else 'FAIL'}] {it.name}: {it.detail}", file=out)
    failed = [it for it in items if not it.ok]
    if failed:
        print(f"selftest failed: {failed[0].name}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _Parser(prog="nijhydro", usage=USAGE)
    parser.add_argument("command", choices=["verify", "solve", "hierarchy", "selftest"])
    parser.add_argument("--config")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--inject", choices=selftest.INJECTIONS, help=argparse.SUPPRESS)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "selftest":
            return cmd_selftest(args.seed or 0, args.inject)
        if not args.config:
            raise ConfigError(f"{args.command} requires --config")
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        if args.command == "verify":
            return cmd_verify(cfg, seed)
        if args.command == "solve":
            return cmd_solve(cfg, seed, args.out)
        return cmd_hierarchy(cfg, seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NijHydroError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
