import json
import math

import pytest

from mplab.bounds import run_theorem
from mplab.errors import BadParams, HypothesisNotMet
from mplab.geometry import crossing_strips, make_cylinder
from mplab.operators import Linear, diag_exprs, preset


def test_abp_linear_mixed():
    op, dom = preset("linear_mixed", n=2, k=1)
    rep = run_theorem("ABP", op, dom, {"f": -1.0, "grid": {"h": 1 / 16, "R": 1.0}})
    assert rep.verdict and rep.hypotheses_ok
    assert rep.outputs["bound"] == pytest.approx(math.e, abs=1e-12)
    assert rep.empirical["max_u"] <= rep.outputs["bound"]
    assert "solution" in rep.fields
    assert "sampled evidence, not proof" in rep.to_text()


def test_mp_counterexample_mode():
    op, dom = preset("c1_degenerate")
    rep = run_theorem("MP", op, dom, {"counterexample": "c1_degenerate", "grid": {"h": math.pi / 8, "R_ladder": [1.0, 2.0]}})
    assert rep.verdict is False and not rep.hypotheses_ok
    assert rep.counterexample["name"] == "c1_degenerate"
    assert any("growth" in f for f in rep.failed_flags)


def test_mp_strict_raises():
    op, dom = preset("quadratic_growth")
    with pytest.raises(HypothesisNotMet) as info:
        run_theorem("MP", op, dom, {"strict": True})
    assert info.value.flag == "orthogonal_growth"


def test_narrow_overrides():
    op = Linear(n=2, A=diag_exprs(["1.0", "1.0"]), c=1.0)
    dom = make_cylinder(2, [[1, 0]], [0.0], [0.5])
    rep = run_theorem("NARROW", op, dom, {"Gamma": 0.0, "K": 1.0, "grid": {"h": 1 / 32, "R": 1.0}})
    assert rep.outputs["threshold"] == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert rep.verdict


def test_narrow_above_threshold_fails():
    op = Linear(n=2, A=diag_exprs(["1.0", "1.0"]), c=1.0)
    dom = make_cylinder(2, [[1, 0]], [0.0], [0.7])
    rep = run_theorem("NARROW", op, dom, {"solve": False})
    assert rep.verdict is False and rep.outputs["margin"] < 0


def test_pl_forward_and_inverse():
    op, dom = preset("laplacian", n=2, d=0.5)
    rep = run_theorem("PL", op, dom, {"beta0": 1.0})
    assert rep.verdict
    assert rep.outputs["alpha_root"] == pytest.approx(math.sqrt(9.24), abs=1e-12)
    assert rep.outputs["beta"] == pytest.approx(1.1)
    assert rep.outputs["d0"] < math.pi / rep.outputs["alpha"]
    assert rep.outputs["inequality_value"] <= 0
    inv = run_theorem("PL", op, dom, {"d0": 0.5})
    assert inv.verdict and inv.outputs["beta"] > 1.1


def test_pl_needs_finite_rho():
    op, dom = preset("linear_mixed", n=2, k=1)
    rep = run_theorem("PL", op, dom, {"beta0": 1.0})
    assert "rho_bound" in rep.failed_flags and rep.verdict is False


def test_lattice_theorem():
    op, _ = preset("laplacian")
    rep = run_theorem("LATTICE", op, crossing_strips(1.0), {"grid": {"h": 0.1, "R": 2.0}})
    assert rep.verdict


def test_unknown_theorem():
    op, dom = preset("laplacian")
    with pytest.raises(BadParams):
        run_theorem("XYZ", op, dom)


def test_report_determinism():
    op, dom = preset("linear_mixed", n=2, k=1)
    opts = {"f": -1.0, "grid": {"h": 1 / 8, "R": 1.0}, "seed": 3}
    a = json.dumps(run_theorem("ABP", op, dom, opts).to_dict(), sort_keys=True, default=str)
    b = json.dumps(run_theorem("ABP", op, dom, opts).to_dict(), sort_keys=True, default=str)
    assert a == b
