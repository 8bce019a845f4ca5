"""Closed-form test functions with exact derivatives.

Sines are evaluated through ``sinpi``/``cospi``: whenever ``x / pi``
rounds to an integer (always for the faces ``x = 0`` and ``x = pi``) the
result is an exact zero; elsewhere the error is a few ulps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import UnknownCounterexample


def sinpi_of(x):
    """``sin(x)`` computed as ``sin(pi t)`` with ``t = x / pi`` reduced mod 2."""
    t = np.asarray(x, dtype=float) / np.pi
    k = np.round(t)
    sign = np.where(np.mod(k, 2.0) == 0.0, 1.0, -1.0)
    return sign * np.sin(np.pi * (t - k))


def cospi_of(x):
    t = np.asarray(x, dtype=float) / np.pi + 0.5
    k = np.round(t)
    sign = np.where(np.mod(k, 2.0) == 0.0, 1.0, -1.0)
    return sign * np.sin(np.pi * (t - k))


def _rows(x):
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


@dataclass(frozen=True)
class AnalyticFunction:
    """Value, gradient and Hessian over rows of an ``(m, n)`` array."""

    name: str
    n: int
    formula: str
    _parts: Callable  # X -> (value (m,), gradient (m, n), hessian (m, n, n))
    kind: str = "analytic"

    def _eval(self, x):
        X, single = _rows(x)
        v, g, h = self._parts(X)
        return (v[0], g[0], h[0]) if single else (v, g, h)

    def value(self, x):
        return self._eval(x)[0]

    def gradient(self, x):
        return self._eval(x)[1]

    def hessian(self, x):
        return self._eval(x)[2]

    def jet(self, x):
        return self._eval(x)

    def params(self) -> dict:
        return {"name": self.name}


def _exp_sin_sin(X):
    e = np.exp(X[:, 0])
    s2, c2 = sinpi_of(X[:, 1]), cospi_of(X[:, 1])
    s3, c3 = sinpi_of(X[:, 2]), cospi_of(X[:, 2])
    u = e * s2 * s3
    g = np.stack([u, e * c2 * s3, e * s2 * c3], axis=1)
    m = len(X)
    H = np.empty((m, 3, 3))
    H[:, 0, 0] = u
    H[:, 1, 1] = -u
    H[:, 2, 2] = -u
    H[:, 0, 1] = H[:, 1, 0] = g[:, 1]
    H[:, 0, 2] = H[:, 2, 0] = g[:, 2]
    H[:, 1, 2] = H[:, 2, 1] = e * c2 * c3
    return u, g, H


def _xsq_sin(X):
    x1, x2 = X[:, 0], X[:, 1]
    s, c = sinpi_of(x1), cospi_of(x1)
    sq = x2 * x2
    u = sq * s
    g = np.stack([sq * c, 2.0 * x2 * s], axis=1)
    H = np.empty((len(X), 2, 2))
    H[:, 0, 0] = -u
    H[:, 1, 1] = 2.0 * s
    H[:, 0, 1] = H[:, 1, 0] = 2.0 * x2 * c
    return u, g, H


REGISTRY = {
    "exp_sin_sin": AnalyticFunction("exp_sin_sin", 3, "exp(x1) sin(x2) sin(x3)", _exp_sin_sin),
    "xsq_sin": AnalyticFunction("xsq_sin", 2, "x2^2 sin(x1)", _xsq_sin),
}


def analytic(name: str) -> AnalyticFunction:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownCounterexample(f"unknown analytic function {name!r}") from None


def shifted(fn, offset: float, name: str | None = None) -> AnalyticFunction:
    """``fn - offset`` (same derivatives)."""

    def parts(X):
        v, g, h = _rows_jet(fn, X)
        return v - offset, g, h

    return AnalyticFunction(name or f"{fn_name(fn)}-{offset:g}", _dim(fn, None), f"({fn_name(fn)}) - {offset!r}", parts)


def combine(terms, name: str = "combination", n: int | None = None) -> AnalyticFunction:
    """Linear combination ``sum c_i f_i`` of objects exposing value/gradient/hessian."""
    terms = list(terms)

    def parts(X):
        v = g = h = None
        for coef, f in terms:
            fv, fg, fh = _rows_jet(f, X)
            v = coef * fv if v is None else v + coef * fv
            g = coef * fg if g is None else g + coef * fg
            h = coef * fh if h is None else h + coef * fh
        return v, g, h

    dim = n if n is not None else _dim(terms[0][1], None)
    formula = " + ".join(f"{c!r}*{fn_name(f)}" for c, f in terms)
    return AnalyticFunction(name, dim, formula, parts)


def constant(value: float, n: int) -> AnalyticFunction:
    def parts(X):
        m = len(X)
        return np.full(m, float(value)), np.zeros((m, n)), np.zeros((m, n, n))

    return AnalyticFunction(f"const({value:g})", n, repr(float(value)), parts)


def _rows_jet(f, X):
    if isinstance(f, AnalyticFunction):
        return f._parts(X)
    return np.asarray(f.value(X)), np.asarray(f.gradient(X)), np.asarray(f.hessian(X))


def _dim(f, default):
    if hasattr(f, "n"):
        return f.n
    if hasattr(f, "nu"):
        return len(f.nu)
    if hasattr(f, "Q"):
        return f.Q.shape[0]
    return default


def fn_name(f) -> str:
    return getattr(f, "name", getattr(f, "kind", type(f).__name__))
