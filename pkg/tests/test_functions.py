import math

import numpy as np
import pytest

import oracles
from mplab.errors import UnknownCounterexample
from mplab.functions import analytic, combine, constant, cospi_of, shifted, sinpi_of


def test_sinpi_exact_zeros():
    assert sinpi_of(0.0) == 0.0 and sinpi_of(np.pi) == 0.0
    assert cospi_of(np.pi / 2) == 0.0
    j = np.arange(-20, 21)
    exact = (j * np.pi) / np.pi == j
    assert np.all(sinpi_of(j * np.pi)[exact] == 0.0)
    assert np.max(np.abs(sinpi_of(j * np.pi))) <= 1e-14
    x = np.linspace(-30, 30, 1001)
    np.testing.assert_allclose(sinpi_of(x), np.sin(x), atol=1e-14)
    np.testing.assert_allclose(cospi_of(x), np.cos(x), atol=1e-14)


def test_registry_values():
    u = analytic("exp_sin_sin")
    assert u.value(np.array([0.0, math.pi / 2, math.pi / 2])) == 1.0
    w = analytic("xsq_sin")
    assert w.value(np.array([math.pi / 2, 3.0])) == 9.0
    with pytest.raises(UnknownCounterexample):
        analytic("nope")


def test_combinators():
    u = analytic("xsq_sin")
    c = combine([(2.0, u), (-1.0, constant(3.0, 2))], n=2)
    s = shifted(u, 1.5)
    x = np.array([[0.4, 1.1], [2.0, -3.0]])
    np.testing.assert_allclose(c.value(x), 2 * u.value(x) - 3.0)
    np.testing.assert_allclose(s.hessian(x), u.hessian(x))
    assert oracles.rel_err(oracles.fd_gradient(c.value, x[0]), c.gradient(x[0])) <= 1e-6


def test_batched_equals_single():
    u = analytic("exp_sin_sin")
    X = np.random.default_rng(0).uniform(-2, 2, size=(7, 3))
    v, g, H = u.jet(X)
    for i in range(7):
        assert v[i] == u.value(X[i])
        np.testing.assert_array_equal(H[i], u.hessian(X[i]))
