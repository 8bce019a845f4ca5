"""Degenerate elliptic operators F(x, s, p, X) and the preset registry.

Three variants are supported:

* :class:`Linear` -- ``Tr(A(x) X) + b(x) . p + c(x) s`` with coefficient
  fields given as expression strings (see :mod:`mplab.expressions`);
* :class:`SupInf` -- ``max_alpha min_beta`` of finitely many constant
  coefficient linear maps (Bellman-Isaacs type);
* :class:`CallableOp` -- a user supplied pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import expressions as ex
from .errors import BadParams, DimensionMismatch, NonFiniteCoefficient, UnknownPreset
from .geometry import make_cylinder, make_lattice

SYM_TOL = 1e-12
PSD_TOL = 1e-12


@dataclass(frozen=True)
class EvalPoint:
    x: np.ndarray
    s: float
    p: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        n = x.size
        if p.size != n or X.shape != (n, n):
            raise DimensionMismatch(f"inconsistent EvalPoint shapes: x {x.shape}, p {p.shape}, X {X.shape}")
        if np.max(np.abs(X - X.T), initial=0.0) > SYM_TOL:
            raise BadParams("X must be symmetric")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "s", float(self.s))


def _as_matrix_exprs(A, n):
    if isinstance(A, (int, float, str)):
        return tuple(tuple(ex.normalize(A, n) if i == j else "0.0" for j in range(n)) for i in range(n))
    A = [list(row) for row in A]
    if len(A) != n or any(len(row) != n for row in A):
        raise DimensionMismatch(f"A must be {n}x{n}")
    return tuple(tuple(ex.normalize(a, n) for a in row) for row in A)


def affine(A, b, c, S, P, X):
    """``Tr(A X) + b . P + c S`` with a fixed summation order.

    ``A``, ``b``, ``c`` may carry a leading batch axis or not; ``S``, ``P``,
    ``X`` likewise.  Every code path evaluates operators through this
    function so that single and batched evaluations agree bitwise.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    n = A.shape[-1]
    acc = np.asarray(c, dtype=float) * np.asarray(S, dtype=float)
    for i in range(n):
        acc = acc + b[..., i] * P[..., i]
    for i in range(n):
        for j in range(n):
            acc = acc + A[..., i, j] * X[..., i, j]
    return acc


def _freeze_single(self, x) -> Callable:
    many = self.freeze_many(x)

    def at(s, p, X):
        return float(many(np.array([s], dtype=float), np.asarray(p, dtype=float)[None], np.asarray(X, dtype=float)[None])[0])

    return at


def diag_exprs(entries) -> tuple:
    n = len(entries)
    return tuple(tuple(ex.normalize(entries[i], n) if i == j else "0.0" for j in range(n)) for i in range(n))


@dataclass(frozen=True)
class Linear:
    """``F = Tr(A(x) X) + b(x) . p + c(x) s`` with expression-valued fields."""

    n: int
    A: tuple
    b: tuple | None = None
    c: str = "0.0"
    name: str = "linear"

    def __post_init__(self):
        n = int(self.n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "A", _as_matrix_exprs(self.A, n))
        b = self.b if self.b is not None else [0.0] * n
        if isinstance(b, (int, float, str)):
            b = [b] * n
        if len(b) != n:
            raise DimensionMismatch(f"b must have {n} entries")
        object.__setattr__(self, "b", tuple(ex.normalize(v, n) for v in b))
        object.__setattr__(self, "c", ex.normalize(self.c if self.c is not None else 0.0, n))
        self._check_symmetric()

    def _check_symmetric(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(4, self.n)) * 3.0
        A = self.A_field(pts)
        if np.max(np.abs(A - np.swapaxes(A, -1, -2))) > 1e-9 * (1.0 + np.max(np.abs(A))):
            raise BadParams(f"coefficient matrix of {self.name!r} is not symmetric")

    def A_field(self, x):
        x = np.asarray(x, dtype=float)
        entries = [[ex.compile_expr(a, self.n)(x) for a in row] for row in self.A]
        out = np.array(entries, dtype=float)
        if x.ndim > 1:
            out = np.moveaxis(out, (0, 1), (-2, -1))
        return out

    def b_field(self, x):
        x = np.asarray(x, dtype=float)
        out = np.array([ex.compile_expr(v, self.n)(x) for v in self.b], dtype=float)
        return np.moveaxis(out, 0, -1) if x.ndim > 1 else out

    def c_field(self, x):
        return ex.compile_expr(self.c, self.n)(np.asarray(x, dtype=float))

    def coefficients(self, x):
        A, b, c = self.A_field(x), self.b_field(x), self.c_field(x)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise NonFiniteCoefficient(f"{self.name}: non-finite coefficient at x={np.asarray(x).tolist()}")
        return A, b, c

    def freeze_many(self, x) -> Callable:
        A, b, c = self.coefficients(x)
        return lambda S, P, X: affine(A, b, c, S, P, X)

    freeze = _freeze_single

    def __call__(self, x, s, p, X) -> float:
        return self.freeze(x)(s, np.asarray(p, dtype=float), np.asarray(X, dtype=float))

    def to_dict(self) -> dict:
        return {"kind": "linear", "dim": self.n, "A": [list(r) for r in self.A], "b": list(self.b), "c": self.c}


@dataclass(frozen=True)
class LinearTerm:
    """Constant-coefficient member ``Tr(A X) + b . p + c s`` of a sup-inf family."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        A = np.atleast_2d(A)
        n = A.shape[0]
        b = np.zeros(n) if self.b is None else np.array(self.b, dtype=float).reshape(-1)
        if A.shape != (n, n) or b.shape != (n,):
            raise DimensionMismatch("LinearTerm needs an n x n matrix and a length-n drift")
        if np.max(np.abs(A - A.T)) > SYM_TOL:
            raise BadParams("LinearTerm matrix must be symmetric")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.isfinite(self.c)):
            raise NonFiniteCoefficient("LinearTerm has non-finite coefficients")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    def __call__(self, s, p, X) -> float:
        return float(affine(self.A, self.b, self.c, s, p, X))

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist(), "c": self.c}


@dataclass(frozen=True)
class SupInf:
    """``max_alpha min_beta L^{alpha beta}`` over a finite list-of-lists of terms."""

    families: tuple
    name: str = "supinf"

    def __post_init__(self):
        fams = tuple(tuple(t if isinstance(t, LinearTerm) else LinearTerm(**t) for t in fam) for fam in self.families)
        if not fams or any(len(f) == 0 for f in fams):
            raise BadParams("SupInf needs at least one non-empty family")
        n = fams[0][0].A.shape[0]
        if any(t.A.shape[0] != n for f in fams for t in f):
            raise DimensionMismatch("all SupInf members must share the dimension")
        object.__setattr__(self, "families", fams)

    @property
    def n(self) -> int:
        return self.families[0][0].A.shape[0]

    def terms(self):
        for fam in self.families:
            yield from fam

    def values(self, s, p, X) -> list:
        return [[t(s, p, X) for t in fam] for fam in self.families]

    def freeze_many(self, x) -> Callable:
        def at(S, P, X):
            per_family = [np.min([affine(t.A, t.b, t.c, S, P, X) for t in fam], axis=0) for fam in self.families]
            return np.max(per_family, axis=0)

        return at

    freeze = _freeze_single

    def __call__(self, x, s, p, X) -> float:
        return self.freeze(x)(s, np.asarray(p, dtype=float), np.asarray(X, dtype=float))

    def to_dict(self) -> dict:
        return {"kind": "supinf", "families": [[t.to_dict() for t in fam] for fam in self.families]}


@dataclass(frozen=True)
class CallableOp:
    """User extension: ``fn(x, s, p, X) -> float``.  Not used by presets."""

    n: int
    fn: Callable
    name: str = "callable"
    metadata: dict = field(default_factory=dict)

    def freeze(self, x) -> Callable:
        x = np.asarray(x, dtype=float)
        return lambda s, p, X: float(self.fn(x, s, p, X))

    def freeze_many(self, x) -> Callable:
        x = np.asarray(x, dtype=float)
        return lambda S, P, X: np.array([float(self.fn(x, S[i], P[i], X[i])) for i in range(len(S))])

    def __call__(self, x, s, p, X) -> float:
        return self.freeze(x)(s, np.asarray(p, dtype=float), np.asarray(X, dtype=float))


OperatorSpec = Union[Linear, SupInf, CallableOp]


def dim(op) -> int:
    return op.n


def evaluate(op, pt: EvalPoint) -> float:
    if pt.x.size != op.n:
        raise DimensionMismatch(f"operator lives in R^{op.n}, point in R^{pt.x.size}")
    val = op.freeze(pt.x)(pt.s, pt.p, pt.X)
    if not np.isfinite(val):
        raise NonFiniteCoefficient(f"{getattr(op, 'name', 'operator')} returned {val} at x={pt.x.tolist()}")
    return val


def evaluate_batch(op, x, s, p, X) -> np.ndarray:
    """Vectorized F over rows: x (m, n), s (m,), p (m, n), X (m, n, n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m = x.shape[0]
    s = np.broadcast_to(np.asarray(s, dtype=float), (m,))
    p = np.broadcast_to(np.asarray(p, dtype=float), (m, op.n))
    X = np.broadcast_to(np.asarray(X, dtype=float), (m, op.n, op.n))
    if isinstance(op, Linear):
        A, b, c = op.coefficients(x)
        out = affine(A, b, c, s, p, X)
    elif isinstance(op, SupInf):
        out = op.freeze_many(None)(s, p, X)
    else:
        out = np.array([op.freeze(x[i])(s[i], p[i], X[i]) for i in range(m)])
    if not np.all(np.isfinite(out)):
        bad = int(np.argmin(np.isfinite(out)))
        raise NonFiniteCoefficient(f"non-finite operator value at x={x[bad].tolist()}")
    return out


def _check_psd(D):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DimensionMismatch("D must be square")
    if np.max(np.abs(D - D.T), initial=0.0) > SYM_TOL or np.linalg.eigvalsh(D)[0] < -PSD_TOL:
        raise BadParams("D must be symmetric positive semidefinite")
    return D


def difference_quotient_dir(op, pt: EvalPoint, D, t: float) -> float:
    """``[F(x, s, p, X + tD) - F(x, s, p, X)] / t`` for psd ``D`` and ``t > 0``."""
    D = _check_psd(D)
    if not t > 0:
        raise BadParams("t must be > 0")
    at = op.freeze(pt.x)
    hi = at(pt.s, pt.p, pt.X + t * D)
    lo = at(pt.s, pt.p, pt.X)
    if not (np.isfinite(hi) and np.isfinite(lo)):
        raise NonFiniteCoefficient("non-finite operator value in difference quotient")
    return (hi - lo) / t


def operator_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "linear":
        return Linear(n=d["dim"], A=d["A"], b=d.get("b"), c=d.get("c", 0.0), name=d.get("name", "linear"))
    if kind == "supinf":
        return SupInf(families=d["families"], name=d.get("name", "supinf"))
    raise BadParams(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------- presets


def _linear_mixed(n=3, k=2, d=1.0, b=None, c=0.0):
    n, k = int(n), int(k)
    if not 1 <= k <= n - 1:
        raise BadParams("linear_mixed needs 1 <= k <= n-1")
    op = Linear(n=n, A=diag_exprs(["1.0"] * k + ["absx"] * (n - k)), b=b, c=c, name="linear_mixed")
    dom = make_cylinder(n, np.eye(n)[:k], [0.0] * k, [float(d)] * k)
    return op, dom


def _c1_degenerate():
    op = Linear(n=3, A=diag_exprs(["1.0", "1.0", "0.0"]), b=None, c=0.0, name="c1_degenerate")
    dom = make_cylinder(3, [[0, 1, 0], [0, 0, 1]], [0.0, 0.0], [np.pi, np.pi])
    return op, dom


def _quadratic_growth():
    op = Linear(n=2, A=diag_exprs(["1.0", "x2**2/2"]), b=None, c=0.0, name="quadratic_growth")
    dom = make_cylinder(2, [[1, 0]], [0.0], [np.pi])
    return op, dom


def _three_cylinders(lambdas=("1 + absx", "2.0", "1 + x3**2/(1 + x3**2)")):
    op = Linear(n=3, A=diag_exprs(list(lambdas)), b=None, c=0.0, name="three_cylinders")
    cyls = []
    for axis in range(3):
        bounded = [i for i in range(3) if i != axis]
        cyls.append(make_cylinder(3, np.eye(3)[bounded], [0.0, 0.0], [np.pi, np.pi]))
    return op, make_lattice(cyls)


BELLMAN_ISAACS_DEMO = (
    (
        {"A": [[1.0, 0.0], [0.0, 0.5]], "b": [0.2, 0.0], "c": 0.0},
        {"A": [[2.0, 0.0], [0.0, 0.0]], "b": [-0.3, 0.1], "c": -0.5},
    ),
    (
        {"A": [[1.5, 0.0], [0.0, 1.0]], "b": [0.0, 0.2], "c": -0.1},
        {"A": [[1.0, 0.0], [0.0, 0.25]], "b": [0.1, -0.1], "c": 0.0},
    ),
)


def _bellman_isaacs_demo(d=1.0):
    op = SupInf(families=BELLMAN_ISAACS_DEMO, name="bellman_isaacs_demo")
    dom = make_cylinder(2, [[1, 0]], [0.0], [float(d)])
    return op, dom


def _laplacian(n=2, d=1.0):
    n = int(n)
    op = Linear(n=n, A=diag_exprs(["1.0"] * n), b=None, c=0.0, name="laplacian")
    dom = make_cylinder(n, np.eye(n)[:1], [0.0], [float(d)])
    return op, dom


PRESETS = {
    "linear_mixed": (_linear_mixed, "Tr(diag(I_k, |x| I_{n-k}) X) + b.p + c s on {0 <= x_h <= d, h <= k}"),
    "c1_degenerate": (_c1_degenerate, "u_x1x1 + u_x2x2 on R x (0, pi)^2 (degenerate in x3)"),
    "quadratic_growth": (_quadratic_growth, "u_x1x1 + x2^2/2 u_x2x2 on (0, pi) x R"),
    "three_cylinders": (_three_cylinders, "sum_i lambda_i(x) u_xixi on the union of C1, C2, C3"),
    "bellman_isaacs_demo": (_bellman_isaacs_demo, "2 x 2 sup-inf family with constant coefficients on (0, d) x R"),
    "laplacian": (_laplacian, "Laplacian on the slab (0, d) x R^{n-1}"),
}


def preset(name: str, **params):
    """Return ``(operator, domain)`` for a registered preset."""
    try:
        factory, _ = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
    return factory(**params)


def list_presets() -> str:
    width = max(len(k) for k in PRESETS)
    return "\n".join(f"{name:<{width}}  {desc}" for name, (_, desc) in sorted(PRESETS.items()))
