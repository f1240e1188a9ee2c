import json
from pathlib import Path

import numpy as np
import pytest

from nijhydro import corpus, selftest
from nijhydro.cli import main
from nijhydro.calculus import symmetry_residual

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "name": "small",
    "operator": {"blocks": [{"type": "diagonal"}, {"type": "diagonal"}]},
    "curve": {"components": ["1 + x", "2 + 0.5*x"], "domain": [-0.5, 0.5]},
    "grids": {"x": {"min": -0.05, "max": 0.05, "count": 5}, "t": {"min": -0.01, "max": 0.01, "count": 3}},
    "seed": 3,
}


def write(tmp_path, cfg, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return str(p)


def test_pinned_witnesses_are_reproducible():
    assert corpus.search_witnesses(0) == corpus.PINNED


@pytest.mark.parametrize("case", sorted(corpus.CASES))
def test_witnesses_violate_their_properties(case):
    w = corpus.PINNED[case]
    assert corpus.p1_residual(case, w["P1"]) > 0.1
    assert corpus.p2_residual(case, w["P2"]) > 0.01
    assert corpus.p5_residual(case, w["P5"]) > 0.01


@pytest.mark.parametrize("case", sorted(corpus.CASES))
def test_families_are_symmetries(case):
    rng = np.random.default_rng(11)
    op, fam, _ = corpus.CASES[case]
    pts = rng.uniform(0.5, 1.5, (20, 3))
    for _ in range(5):
        assert symmetry_residual(op(), fam(*corpus.random_member(rng)), pts) < 1e-9


def test_selftest_passes_and_injection_is_caught():
    assert all(it.ok for it in selftest.run(0))
    bad = [it for it in selftest.run(0, "rec-sign") if not it.ok]
    assert bad and any("Cayley-Hamilton" in it.name for it in bad)


def test_selftest_exit_codes(capsys):
    assert main(["selftest"]) == 0
    assert main(["selftest", "--inject", "rec-sign"]) == 1
    assert "Cayley-Hamilton" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["verify-counterexample-1.json", "verify-toeplitz-3.json"])
def test_verify_configs(name, capsys):
    assert main(["verify", "--config", str(CONFIGS / name)]) == 0
    assert "ok" in capsys.readouterr().out


def test_verify_reports_unmet_expectation(tmp_path):
    cfg = json.loads((CONFIGS / "verify-counterexample-1.json").read_text())
    cfg["verify"]["expect"][0]["expect"] = "fail"
    assert main(["verify", "--config", write(tmp_path, cfg)]) == 1


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["solve"]) == 2
    assert main(["solve", "--config", str(tmp_path / "none.json")]) == 2
    assert main(["solve", "--config", write(tmp_path, dict(SMALL, colour=1))]) == 2
    bad = dict(SMALL, curve=dict(SMALL["curve"], components=["1 + x", "2 +* x"]))
    assert main(["solve", "--config", write(tmp_path, bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_non_cyclic_curve_fails(tmp_path, capsys):
    assert main(["solve", "--config", str(CONFIGS / "non-cyclic-curve.json"), "--out", str(tmp_path)]) == 1
    assert "NotCyclicVelocity" in capsys.readouterr().err


def test_solve_writes_outputs_deterministically(tmp_path):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfg, "--out", str(a)]) == 0
    assert main(["solve", "--config", cfg, "--out", str(b)]) == 0
    for f in ("solution.csv", "residuals.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    rows = (a / "solution.csv").read_text().splitlines()
    assert rows[0] == "t1,x,u1,u2,converged" and len(rows) == 16
    assert "converged: 15" in (a / "report.txt").read_text()


def test_hierarchy_command(tmp_path, capsys):
    assert main(["hierarchy", "--config", write(tmp_path, SMALL), "--out", str(tmp_path)]) == 0
    assert "comp2" in capsys.readouterr().out
    assert (tmp_path / "hierarchy.csv").read_text().startswith("u1,u2,f1,f2")
