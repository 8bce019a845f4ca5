import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mplab.errors import BadParams, DimensionMismatch, NonFiniteCoefficient, UnknownPreset
from mplab.operators import (
    PRESETS,
    CallableOp,
    EvalPoint,
    Linear,
    SupInf,
    diag_exprs,
    difference_quotient_dir,
    evaluate,
    evaluate_batch,
    list_presets,
    operator_from_dict,
    preset,
)


def pt(x, s=0.0, p=None, X=None):
    x = np.asarray(x, dtype=float)
    n = len(x)
    return EvalPoint(x, s, np.zeros(n) if p is None else np.asarray(p, float), np.zeros((n, n)) if X is None else np.asarray(X, float))


def test_linear_mixed_example():
    op, _ = preset("linear_mixed", n=3, k=2)
    assert evaluate(op, pt([0, 0, 5], X=np.eye(3))) == pytest.approx(7.0, abs=1e-14)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_normalization(name):
    op, dom = preset(name)
    x = np.linspace(0.1, 0.9, dom.n)
    assert evaluate(op, pt(x)) == 0.0


def test_supinf_single_family_trace():
    op = SupInf(families=[[{"A": np.eye(2), "b": None, "c": 0.0}]])
    assert evaluate(op, pt([0.3, 0.4], X=np.diag([2.0, 3.0]))) == 5.0


def test_preset_examples():
    op, _ = preset("c1_degenerate")
    assert evaluate(op, pt([1, 1, 1], X=np.diag([1, 1, 0]))) == 2.0
    op, dom = preset("linear_mixed", n=3, k=2)
    x = np.array([0.0, 6.0, 8.0])
    assert evaluate(op, pt(x, X=np.diag([0, 0, 1.0]))) == pytest.approx(10.0)
    op, _ = preset("quadratic_growth")
    assert evaluate(op, pt([1, 4], X=np.diag([0, 1.0]))) == 8.0


def test_difference_quotients():
    op, dom = preset("linear_mixed", n=3, k=2)
    nu = dom.bounded_dirs[0]
    for t in (1e-3, 1.0, 7.0):
        assert difference_quotient_dir(op, pt([1, 2, 3]), np.outer(nu, nu), t) == pytest.approx(1.0)
    Q = np.diag([0.0, 0.0, 1.0])
    x = np.array([0.0, 0.0, 7.0])
    assert difference_quotient_dir(op, pt(x), Q, 0.5) == pytest.approx(7.0)
    with pytest.raises(BadParams):
        difference_quotient_dir(op, pt(x), -Q, 0.5)
    with pytest.raises(BadParams):
        difference_quotient_dir(op, pt(x), Q, 0.0)


def test_unknown_preset_and_listing():
    with pytest.raises(UnknownPreset):
        preset("nope")
    text = list_presets()
    for name in ("linear_mixed", "c1_degenerate", "three_cylinders"):
        assert name in text


@pytest.mark.filterwarnings("ignore:divide by zero")
def test_non_finite_and_shape_errors():
    op = Linear(n=2, A=diag_exprs(["1/x1", "1.0"]))
    with pytest.raises(NonFiniteCoefficient):
        op.coefficients(np.array([[0.0, 1.0]]))
    with pytest.raises(DimensionMismatch):
        Linear(n=2, A=diag_exprs(["1.0", "1.0"]), b=[1.0, 2.0, 3.0])
    with pytest.raises(BadParams):
        Linear(n=2, A=[["1.0", "x1"], ["0.0", "1.0"]])


def test_dict_round_trip():
    op, _ = preset("bellman_isaacs_demo")
    back = operator_from_dict(op.to_dict())
    rng = np.random.default_rng(0)
    for _ in range(5):
        X = rng.normal(size=(2, 2))
        X = X + X.T
        p = rng.normal(size=2)
        assert back([0, 0], 0.3, p, X) == op([0, 0], 0.3, p, X)
    lin, _ = preset("linear_mixed")
    assert operator_from_dict(lin.to_dict()).to_dict() == lin.to_dict()


def test_callable_op_batches():
    op = CallableOp(2, lambda x, s, p, X: float(np.trace(X)) - s)
    v = evaluate_batch(op, np.zeros((3, 2)), np.array([0.0, 1.0, 2.0]), np.zeros((3, 2)), np.broadcast_to(np.eye(2), (3, 2, 2)))
    np.testing.assert_allclose(v, [2.0, 1.0, 0.0])


sym = st.lists(st.floats(-5, 5), min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2)).map(lambda M: M + M.T)
psd = st.lists(st.floats(-3, 3), min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2)).map(lambda M: M @ M.T)


@settings(max_examples=80, deadline=None)
@given(sym, psd, st.floats(1e-3, 10), st.floats(-5, 5), st.floats(0, 5), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_monotonicity_in_X_and_s(X, D, t, s, ds, x):
    x = np.asarray(x)
    for name in ("bellman_isaacs_demo", "quadratic_growth", "laplacian"):
        op, _ = preset(name)
        p = np.array([0.3, -0.2])
        assert op(x, s, p, X + t * D) >= op(x, s, p, X) - 1e-12 * (1 + abs(op(x, s, p, X)))
        assert op(x, s + ds, p, X) <= op(x, s, p, X) + 1e-12


@settings(max_examples=50, deadline=None)
@given(sym, st.floats(-3, 3), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_supinf_matches_brute_force(X, s, p):
    op, _ = preset("bellman_isaacs_demo")
    p = np.asarray(p)
    got = op([0.0, 0.0], s, p, X)
    assert got == max(min(t(s, p, X) for t in fam) for fam in op.families)
    by_hand = max(min(float(np.trace(t.A @ X) + t.b @ p + t.c * s) for t in fam) for fam in op.families)
    assert got == pytest.approx(by_hand, rel=1e-14, abs=1e-14)
