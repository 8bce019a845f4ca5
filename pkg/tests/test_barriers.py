import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mplab.barriers import (
    AbpAux,
    ExpDir,
    PLBarrier,
    Sponge,
    abp_bound,
    abp_factor,
    abp_params,
    exp_dir_barrier,
    family_from_dict,
    family_to_dict,
    narrow_threshold,
    pl_alpha_root,
    pl_barrier,
    pl_inequality,
    pl_solve,
    pl_truncation_constant,
    sponge_bounds,
    width_from_alpha,
)
from mplab.errors import BadParams, CosineDegenerate, NegativeInput, NonPositiveK
from mplab.geometry import make_cylinder, projections

STRIP = projections(make_cylinder(2, [[1, 0]], [0.0], [1.0]))


def test_sponge_examples():
    g, gap = sponge_bounds(np.array([0.5, 0.0]), STRIP)
    assert g == 0.0 and gap >= -1e-12
    sp = Sponge.for_domain(STRIP)
    np.testing.assert_allclose(sp.hessian(np.array([0.5, 0.0])), STRIP.Q)
    g, _ = sponge_bounds(np.array([0.5, 3.0]), STRIP)
    assert g == pytest.approx(3 / math.sqrt(10), abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2))
def test_sponge_gradient_below_one(x):
    g, gap = sponge_bounds(np.asarray(x), STRIP)
    assert g < 1.0 and gap >= -1e-10


def test_abp_params_examples():
    assert abp_params(0, 1) == (1, 1)
    assert abp_params(3, 0) == (4, 0)
    assert abp_params(1, 2) == (2, 1)
    with pytest.raises(NegativeInput):
        abp_params(-1, 0)


def test_abp_bound_examples():
    assert abp_bound(1, 0, 1, 0) == pytest.approx(math.e, abs=1e-15)
    assert abp_bound(3.0, 2.0, 0.0, 0.25) == 0.25
    assert abp_bound(2, 0.5, 1, 0.3) == pytest.approx(0.3 + math.e**2 / 2 * 4, rel=1e-14)
    assert abp_bound(2, 0.5, 1, 0.3) == pytest.approx(15.078, abs=1e-3)
    with pytest.raises(NegativeInput):
        abp_bound(0.0, 0, 1, 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 5), st.floats(0, 5), st.floats(0, 5), st.floats(0, 5), st.floats(0.0, 1.0))
def test_abp_bound_monotone(d, G, s, b, bump):
    base = abp_bound(d, G, s, b)
    assert abp_bound(d + bump, G, s, b) >= base
    assert abp_bound(d, G + bump, s, b) >= base
    assert abp_bound(d, G, s + bump, b) >= base
    assert abp_bound(d, G, s, b + bump) >= base


@pytest.mark.parametrize("K", [1.0, 4.0, 10.0, 0.3])
def test_narrow_threshold_closed_form(K):
    assert abs(narrow_threshold(0.0, K) - oracles.narrow_closed_form(K)) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.floats(1e-3, 1e3))
def test_narrow_threshold_identity(G, K):
    d = narrow_threshold(G, K)
    assert d * d * K * abp_factor(d, G) == pytest.approx(1.0, abs=1e-9)


def test_narrow_threshold_edges():
    assert narrow_threshold(0.0, 4.0) == pytest.approx(math.exp(-0.5) / 2, abs=1e-12)
    assert narrow_threshold(0.0, 1e-320) == math.inf or narrow_threshold(0.0, 1e-300) > 1e140
    for K in (0.0, -1.0):
        with pytest.raises(NonPositiveK):
            narrow_threshold(0.0, K)


def test_pl_roots_and_sharpness():
    assert pl_alpha_root(1, 1, 0) == pytest.approx(math.sqrt(8), abs=1e-12)
    assert pl_alpha_root(1, 1, 1) == pytest.approx(1 + math.sqrt(11), abs=1e-12)
    assert pl_alpha_root(1, 1e-12, 0) < 1e-5
    a = pl_alpha_root(1.3, 0.7, 0.4)
    assert pl_inequality(a, 1.3, 0.7, 0.4) == pytest.approx(0.0, abs=1e-12)
    assert pl_inequality(0.99 * a, 1.3, 0.7, 0.4) > 0
    # the stored form is half the hand-written quadratic
    assert pl_inequality(2.0, 0.5, 1.0, 0.3) == pytest.approx(0.5 * oracles.pl_quadratic(2.0, 0.5, 1.0, 0.3))


def test_pl_solve_defaults():
    p = pl_solve(1.0, 1.0, 0.0, n_xh=513)
    assert p.beta == pytest.approx(1.1)
    assert p.alpha_root == pytest.approx(math.sqrt(9.24), abs=1e-12)
    assert p.margin <= 0 and p.margin > -1e-7
    assert 0 < p.d_width < math.pi / p.alpha
    with pytest.raises(BadParams):
        pl_solve(0.0, 1.0, 0.0)


def _pl_oracle_max_eig(alpha, beta, d, n_x=401, r_max=300.0):
    """Brute-force: largest eigenvalue of e^{-beta phi} D^2 v - bound, in 3-D with one bounded axis."""
    v = PLBarrier(alpha, beta, np.array([1.0, 0.0, 0.0]), np.diag([0.0, 1.0, 1.0]), 0.0)
    centre = math.pi / (2 * alpha)
    worst = -math.inf
    for t in np.linspace(centre - d / 2, centre + d / 2, n_x):
        for r in np.concatenate([[0.0], np.logspace(-3, math.log10(r_max), 60)]):
            x = np.array([t, r, 0.0])
            phi = math.sqrt(r * r + 1)
            H = v.hessian(x) * math.exp(-beta * phi)
            bound = np.diag([-alpha**2 / 2, 2 * beta * (beta + 1), 2 * beta * (beta + 1)])
            worst = max(worst, float(np.linalg.eigvalsh(H - bound)[-1]))
    return worst


def test_width_against_brute_force_oracle():
    alpha = math.sqrt(8) * (1 + 1e-9)
    w = width_from_alpha(alpha, 1.0)
    assert w.d0 < math.pi / alpha and w.d0 <= w.sine_cap
    assert _pl_oracle_max_eig(alpha, 1.0, w.d0) <= 1e-9
    # slightly wider bands are rejected by the oracle as well as the solver
    assert _pl_oracle_max_eig(alpha, 1.0, min(w.d0 * 1.05, w.sine_cap)) > 0 or w.d0 * 1.05 > w.sine_cap


def test_q_block_at_axis():
    beta = 1.7
    assert beta * (beta * 0 + 1) <= 2 * beta * (beta + 1)


def test_truncation_constant():
    assert pl_truncation_constant(0.0, 1.0, 5.0, 2.0, 0.5) == 0.0
    assert pl_truncation_constant(1.0, 1.0, 0.0, 2 * math.pi / 3, 1.0) == pytest.approx(2.0)
    alpha, beta, beta0, d = 3.0, 1.1, 1.0, 0.5
    vals = [pl_truncation_constant(math.exp(beta0 * R), beta, R, alpha, d) for R in (10, 20, 40, 80)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-3
    with pytest.raises(CosineDegenerate):
        pl_truncation_constant(1.0, 1.0, 1.0, 1.0, math.pi)


def test_exp_dir_examples():
    nu = np.array([1.0, 0.0])
    h = exp_dir_barrier(2.0, 1.5, 0.8, 0.3, nu)
    assert h.value(np.array([0.3, 7.0])) == pytest.approx(2.0, rel=1e-15)
    ts = np.linspace(-0.8, 0.8, 2001)
    vals = h.value(np.stack([0.3 + ts, np.zeros_like(ts)], axis=1))
    assert vals.min() >= 2.0 * math.exp(-2 * 1.5 * 0.8) - 1e-14
    assert h.slab_infimum(-0.8, 0.8) == pytest.approx(vals.min())
    H = h.hessian(np.array([0.1, 0.2]))
    assert H[1, 1] == 0.0 and H[0, 1] == 0.0
    with pytest.raises(BadParams):
        exp_dir_barrier(1.0, 1.0, 1.0, 0.0, [2.0, 0.0])


def test_pl_barrier_band_centre():
    p = pl_solve(1.0, 1.0, 0.0, n_xh=257)
    v = pl_barrier(p, [1.0, 0.0], np.diag([0.0, 1.0]), band_centre_at=0.25)
    assert v.value(np.array([0.25, 0.0])) == pytest.approx(math.e ** p.beta)


@pytest.mark.parametrize(
    "fam",
    [
        Sponge(np.diag([0.0, 1.0])),
        ExpDir(1.0, 2.0, 0.5, 0.0, np.array([1.0, 0.0])),
        AbpAux(0.5, 1.0, np.array([0.0, 1.0]), 0.1, 2.0),
        PLBarrier(3.0, 1.1, np.array([1.0, 0.0]), np.diag([0.0, 1.0]), 0.2),
    ],
)
def test_family_serialization(fam):
    back = family_from_dict(family_to_dict(fam))
    x = np.array([[0.3, -1.2], [0.1, 4.0]])
    np.testing.assert_array_equal(back.value(x), fam.value(x))
    np.testing.assert_array_equal(back.hessian(x), fam.hessian(x))
