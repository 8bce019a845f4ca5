import numpy as np
import pytest

from mplab.errors import DimensionMismatch, InsufficientSamples
from mplab.geometry import make_cylinder
from mplab.operators import Linear, SupInf, diag_exprs, preset
from mplab.structure import LABEL, NARROW_FLAG, check_narrow_mode, check_structure, make_plan, reproduce


def run(name, mode="auto", **params):
    op, dom = preset(name, **params)
    return op, dom, check_structure(op, dom, make_plan(dom, seed=3), mode=mode)


@pytest.mark.parametrize("mode", ["auto", "sampled"])
def test_linear_mixed_passes(mode):
    op, dom, rep = run("linear_mixed", mode=mode)
    assert rep.passed, rep.summary()
    lam = np.array([v for _, v in rep.lambda_samples])
    np.testing.assert_allclose(lam, 1.0, atol=1e-10)
    assert rep.Lambda1 == pytest.approx(1.0, rel=0.05)
    assert rep.label == LABEL and LABEL in rep.summary()


def test_lambda_probe_matches_coefficients():
    op = Linear(n=2, A=diag_exprs(["2 + sin(x2)", "1.0"]), name="wavy")
    dom = make_cylinder(2, [[1, 0]], [0.0], [1.0])
    rep = check_structure(op, dom, make_plan(dom, seed=1), mode="sampled")
    nu = dom.bounded_dirs[rep.ellipticity_index]
    for x, lam in rep.lambda_samples:
        exact = float(nu @ op.A_field(np.asarray(x)) @ nu)
        assert abs(lam - exact) <= 1e-10


def test_c1_directional_failure():
    op, dom, rep = run("c1_degenerate")
    per_dir = {d.index: d.passed for d in rep.directions}
    assert per_dir[1] is False and per_dir[0] is True
    assert not rep.all_bounded_directions_elliptic


def test_quadratic_growth_flag_and_witness():
    op, dom, rep = run("quadratic_growth")
    flag = rep.flags["orthogonal_growth"]
    assert not flag.passed
    assert abs(flag.witness.x[1]) >= 100
    assert "orthogonal_growth" in rep.failed_flags()


@pytest.mark.parametrize("name", ["quadratic_growth"])
def test_witness_reproduces_exactly(name):
    op, dom, rep = run(name, mode="sampled")
    for fname in rep.failed_flags():
        w = rep.flags[fname].witness
        assert reproduce(op, w) == w.value


def test_supinf_members_elliptic_imply_flag():
    op, dom, rep = run("bellman_isaacs_demo")
    assert rep.flags["degenerate_ellipticity"].passed
    _, _, rep_s = run("bellman_isaacs_demo", mode="sampled")
    assert rep_s.flags["degenerate_ellipticity"].passed


def test_positive_c_fails_monotonicity_but_passes_narrow():
    op = Linear(n=2, A=diag_exprs(["1.0", "1.0"]), c=0.5)
    dom = make_cylinder(2, [[1, 0]], [0.0], [1.0])
    plan = make_plan(dom, seed=0)
    plain = check_structure(op, dom, plan)
    assert "s_monotonicity" in plain.failed_flags()
    narrow = check_narrow_mode(op, dom, plan)
    assert narrow.passed and narrow.K == pytest.approx(0.5)
    assert NARROW_FLAG in narrow.flags


def test_zero_c_gives_zero_K():
    op, dom = preset("laplacian")
    assert check_narrow_mode(op, dom, make_plan(dom)).K == 0.0


def test_growing_c_flags_unbounded_K():
    op = Linear(n=2, A=diag_exprs(["1.0", "1.0"]), c="x2**2")
    dom = make_cylinder(2, [[1, 0]], [0.0], [1.0])
    rep = check_narrow_mode(op, dom, make_plan(dom))
    assert rep.K_finite is False


def test_errors():
    op, dom = preset("laplacian")
    with pytest.raises(InsufficientSamples):
        check_structure(op, dom, make_plan(dom, n_interior=4))
    op3, _ = preset("c1_degenerate")
    with pytest.raises(DimensionMismatch):
        check_structure(op3, dom, make_plan(dom))


def test_deterministic_and_threads():
    op, dom = preset("linear_mixed")
    a = check_structure(op, dom, make_plan(dom, seed=5), mode="sampled").to_dict()
    b = check_structure(op, dom, make_plan(dom, seed=5), mode="sampled", threads=4).to_dict()
    assert a == b
