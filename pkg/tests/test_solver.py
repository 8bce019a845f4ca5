import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import expected
from mplab.errors import NoConvergence, NonMonotoneStencil
from mplab.functions import analytic
from mplab.geometry import crossing_strips, make_cylinder
from mplab.operators import Linear, diag_exprs, preset
from mplab.solver import (
    ARTIFICIAL,
    INTERIOR,
    PHYSICAL,
    apply_operator,
    discrete_residual,
    discretize,
    empirical_mp_check,
    lattice_mp_scenario,
    make_grid,
    solve_dirichlet,
    violation_study,
)

SLAB = make_cylinder(2, [[1, 0]], [0.0], [1.0])


def test_grid_kinds():
    g = make_grid(SLAB, 0.25, R=1.0)
    assert g.shape == (5, 9)
    kinds = g.kind.reshape(g.shape)
    assert np.all(kinds[0, :] == PHYSICAL) and np.all(kinds[-1, :] == PHYSICAL)
    assert np.all(kinds[1:-1, 0] == ARTIFICIAL)
    assert np.sum(g.kind == INTERIOR) == 3 * 7


def test_consistency_on_quadratics():
    op = Linear(n=2, A=diag_exprs(["2 + x2**2", "0.5 + sin(x1)**2"]), c="-1 - x1**2")
    grid = make_grid(SLAB, 0.1, R=1.0)
    X = grid.points
    u = 1.0 + 2 * X[:, 0] - X[:, 1] + 3 * X[:, 0] ** 2 - 0.5 * X[:, 1] ** 2
    Xi = X[grid.interior]
    A = op.A_field(Xi)
    exact = A[:, 0, 0] * 6.0 + A[:, 1, 1] * (-1.0) + op.c_field(Xi) * u[grid.interior]
    np.testing.assert_allclose(apply_operator(discretize(op, grid), u), exact, rtol=1e-11, atol=1e-10)


def test_non_monotone_stencil_rejected():
    op = Linear(n=2, A=[["1.0", "0.3"], ["0.3", "1.0"]])
    with pytest.raises(NonMonotoneStencil) as info:
        discretize(op, make_grid(SLAB, 0.25, R=1.0))
    assert info.value.node is not None


def test_torsion_against_series():
    op, dom = preset("laplacian")
    _, rep = solve_dirichlet(op, make_grid(dom, 1 / 64, ranges=(0.0, 1.0)), -1.0, 0.0)
    assert abs(rep.max_value - expected.TORSION_CENTRE) < 2e-5
    assert rep.argmax == pytest.approx([0.5, 0.5])


def test_gauss_seidel_matches_direct():
    op, dom = preset("laplacian")
    grid = make_grid(dom, 1 / 16, ranges=(0.0, 1.0))
    a, _ = solve_dirichlet(op, grid, -1.0, 0.0)
    b, rep = solve_dirichlet(op, grid, -1.0, 0.0, method="gauss-seidel", tol=1e-12)
    assert rep.converged
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_gauss_seidel_cap():
    op, dom = preset("laplacian")
    with pytest.raises(NoConvergence) as info:
        solve_dirichlet(op, make_grid(dom, 1 / 32, ranges=(0.0, 1.0)), -1.0, 0.0, method="gauss-seidel", max_sweeps=5)
    assert info.value.iterations == 5


def test_policy_iteration():
    op, dom = preset("bellman_isaacs_demo")
    grid = make_grid(dom, 1 / 32, R=1.0)
    fld, rep = solve_dirichlet(op, grid, "sin(4 * x1) + x2", "0.1 * x2")
    hist = rep.residual_history
    assert rep.converged and rep.policy_iterations <= 100
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert discrete_residual(discretize(op, grid), fld, "sin(4 * x1) + x2") <= 1e-9


def test_field_csv(tmp_path):
    op, dom = preset("laplacian")
    fld, _ = solve_dirichlet(op, make_grid(dom, 0.25, R=0.5), -1.0, 0.0)
    path = tmp_path / "u.csv"
    text = fld.to_csv(path)
    assert path.read_text() == text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["x1", "x2", "value"]
    assert len(rows) - 1 == fld.grid.size


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.2, 3.0),
    st.floats(0.2, 3.0),
    st.floats(-4, 4),
    st.floats(0, 5),
    st.floats(0, 3),
    st.floats(-2, 0),
)
def test_discrete_mp_property(a1, a2, b1, c0, f0, g0):
    op = Linear(n=2, A=diag_exprs([f"{a1!r}", f"{a2!r} + x1**2"]), b=[f"{b1!r}", "sin(x2)"], c=f"-{c0!r}")
    _, rep = solve_dirichlet(op, make_grid(SLAB, 1 / 8, R=1.0), f"{f0!r} * (1 + cos(x2))**2", g0)
    assert rep.max_value <= 1e-12


def test_empirical_mp_check_reports_faces():
    op, dom = preset("linear_mixed", n=2, k=1)
    v = empirical_mp_check(op, dom, h=0.1, R=2.0, f_variants=(0.0, 1.0), g=0.0)
    assert v.verdict and len(v.reports) == 2
    assert set(v.fields) == {"mp_rhs0", "mp_rhs1"}
    assert v.reports[0].counts["truncation face"] > 0


def test_violation_study_grows():
    op, dom = preset("c1_degenerate")
    v = violation_study(op, dom, analytic("exp_sin_sin"), h=math.pi / 8, R_ladder=(1.0, 2.0, 3.0))
    assert v.verdict
    m = v.details["interior_max"]
    assert m[0] > 0 and m[0] < m[1] < m[2]


def test_lattice_out_of_hypotheses():
    op = Linear(n=2, A=diag_exprs(["1.0", "0.0"]))
    v = lattice_mp_scenario(crossing_strips(1.0), op, h=0.1, R=1.0)
    assert v.verdict is None and "OUT OF HYPOTHESES" in v.status


@pytest.mark.parametrize("h", [0.1, 0.05])
def test_lattice_localization(h):
    op, _ = preset("laplacian")
    v = lattice_mp_scenario(crossing_strips(1.0), op, h=h, R=2.0)
    assert v.verdict
    assert all(loc["within_one_cell"] for k, loc in v.details["localization"].items() if k != "node boundary")
