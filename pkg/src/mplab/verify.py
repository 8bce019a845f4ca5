"""Pointwise certificates for differential inequalities on sample sets.

A certificate evaluates ``F(x, w(x), Dw(x), D^2 w(x)) - rhs(x)`` for a
closed-form ``w`` at every sample, records the worst margin and the point
that attains it.  Everything here is sampled evidence, not proof.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from . import expressions as ex
from .barriers import AbpAux, abp_bound, abp_params
from .errors import BadScale, MPLabError, UnknownCounterexample
from .functions import AnalyticFunction, _rows_jet, analytic, combine, constant, fn_name
from .geometry import CylinderSpec, projections
from .operators import CallableOp, Linear, LinearTerm, SupInf, evaluate_batch, preset
from .structure import LABEL, check_structure, make_plan

DEFAULT_TOL = 1e-10
PL_TOL = 1e-8
CHUNK = 512
SIGNS = (">=", "<=", "==")


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray
    description: str
    seed: int | None = None

    def __len__(self):
        return len(self.points)


@dataclass
class Certificate:
    claim: str
    sign: str
    n_samples: int
    sample_description: str
    seed: int | None
    tolerance: float
    worst_margin: float
    witness: list | None
    witness_index: int | None
    verdict: bool
    detail: str = ""
    values: dict = field(default_factory=dict)
    label: str = LABEL

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(**d)

    def line(self) -> str:
        mark = "PASS" if self.verdict else "FAIL"
        where = "" if self.witness is None else f" at x={_fmt(self.witness)}"
        return (
            f"[{mark}] {self.claim}: worst margin {self.worst_margin:.6e}{where} "
            f"({self.n_samples} samples, {self.sample_description}, seed {self.seed}, tol {self.tolerance:g})"
        )


def _fmt(x) -> str:
    return "(" + ", ".join(f"{v:.9g}" for v in x) + ")"


# ------------------------------------------------------------------ sampling


def _frame_box(dom: CylinderSpec, ranges) -> tuple[np.ndarray, np.ndarray]:
    lo = list(dom.offsets)
    hi = list(dom.offsets + dom.widths)
    extra = dom.n - dom.k
    if ranges is None:
        ranges = [(-10.0, 10.0)] * extra
    elif len(ranges) == 2 and np.isscalar(ranges[0]):
        ranges = [tuple(ranges)] * extra
    if len(ranges) != extra:
        raise MPLabError(f"need {extra} unbounded ranges, got {len(ranges)}")
    for a, b in ranges:
        lo.append(float(a))
        hi.append(float(b))
    return np.array(lo), np.array(hi)


def _sobol(dim: int, m: int, seed: int) -> np.ndarray:
    eng = qmc.Sobol(d=dim, scramble=True, seed=seed)
    return eng.random_base2(max(0, math.ceil(math.log2(max(m, 1)))))[:m]


def _to_ambient(dom: CylinderSpec, coords: np.ndarray) -> np.ndarray:
    return coords @ dom.frame


def interior_samples(dom: CylinderSpec, m: int, seed: int = 0, ranges=None) -> SampleSet:
    """Scrambled Sobol points strictly inside the slabs.

    ``ranges`` gives one ``(lo, hi)`` per unbounded direction (or one pair
    used for all of them); default ``(-10, 10)``.
    """
    lo, hi = _frame_box(dom, ranges)
    u = _sobol(dom.n, m, seed)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    pts = _to_ambient(dom, lo + u * (hi - lo))
    desc = "interior Sobol, box " + " x ".join(f"[{a:g},{b:g}]" for a, b in zip(lo, hi))
    return SampleSet(pts, desc, seed)


def boundary_samples(dom: CylinderSpec, m: int, seed: int = 0, ranges=None) -> SampleSet:
    """Points on the exact faces ``x.nu_h in {a_h, a_h + d_h}``, cycling over faces."""
    lo, hi = _frame_box(dom, ranges)
    u = _sobol(dom.n, m, seed)
    coords = lo + u * (hi - lo)
    for i in range(m):
        face = i % (2 * dom.k)
        h = face // 2
        coords[i, h] = lo[h] if face % 2 == 0 else hi[h]
    return SampleSet(_to_ambient(dom, coords), f"exact faces of {2 * dom.k} slab boundaries", seed)


def line_samples(base, direction, ts, description="") -> SampleSet:
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    pts = base[None] + np.asarray(ts, dtype=float)[:, None] * direction[None]
    return SampleSet(pts, description or f"line through {_fmt(base)}", None)


def _as_samples(samples) -> SampleSet:
    if isinstance(samples, SampleSet):
        return samples
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    return SampleSet(pts, "explicit points", None)


# -------------------------------------------------------------- certificates


def _rhs_values(rhs, X) -> np.ndarray:
    if rhs is None:
        return np.zeros(len(X))
    if callable(rhs):
        return np.broadcast_to(np.asarray(rhs(X), dtype=float), (len(X),))
    if isinstance(rhs, str):
        return np.broadcast_to(ex.compile_expr(rhs, X.shape[1])(X), (len(X),))
    return np.full(len(X), float(rhs))


def residuals(op, fn, X, rhs=0.0, zero_order: bool = True) -> np.ndarray:
    """``F(x, fn, Dfn, D^2 fn) - rhs`` at each row (``s = 0`` when ``zero_order`` is off)."""
    v, g, H = _rows_jet(fn, X)
    s = v if zero_order else np.zeros(len(X))
    return evaluate_batch(op, X, s, g, H) - _rhs_values(rhs, X)


def _margins(r: np.ndarray, sign: str) -> np.ndarray:
    if sign == ">=":
        return r
    if sign == "<=":
        return -r
    return -np.abs(r)


def _chunked(fn, X, threads):
    chunks = [X[i : i + CHUNK] for i in range(0, len(X), CHUNK)]
    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros(0)


def certificate_from_margins(claim, sign, samples: SampleSet, margins, tolerance, detail="", values=None) -> Certificate:
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        raise MPLabError("empty sample set")
    idx = int(np.argmin(margins))  # first occurrence: deterministic
    worst = float(margins[idx])
    return Certificate(
        claim=claim,
        sign=sign,
        n_samples=int(margins.size),
        sample_description=samples.description,
        seed=samples.seed,
        tolerance=float(tolerance),
        worst_margin=worst,
        witness=[float(v) for v in samples.points[idx]],
        witness_index=idx,
        verdict=bool(worst >= -tolerance),
        detail=detail,
        values=dict(values or {}),
    )


def certify_inequality(
    op,
    fn,
    dom,
    samples,
    sign: str = ">=",
    rhs=0.0,
    tolerance: float = DEFAULT_TOL,
    claim: str | None = None,
    zero_order: bool = True,
    threads: int | None = None,
) -> Certificate:
    """Check ``F[fn] (sign) rhs`` at every sample; ``sign`` is ``>=``, ``<=`` or ``==``.

    The margin is ``F[fn] - rhs`` for ``>=``, its negative for ``<=`` and
    ``-|F[fn] - rhs|`` for ``==``.  Samples are split into fixed chunks for
    the thread pool, and the worst margin is the first minimum over the
    original enumeration, so the result does not depend on ``threads``.
    """
    if sign not in SIGNS:
        raise MPLabError(f"sign must be one of {SIGNS}")
    S = _as_samples(samples)
    r = _chunked(lambda X: residuals(op, fn, X, rhs, zero_order), S.points, threads)
    claim = claim or f"F[{fn_name(fn)}] {sign} rhs on {type(dom).__name__}"
    return certificate_from_margins(claim, sign, S, _margins(r, sign), tolerance, detail=getattr(op, "name", ""))


def recheck(cert: Certificate, op, fn, rhs=0.0, zero_order: bool = True) -> float:
    """Recompute the margin at the stored witness."""
    X = np.asarray(cert.witness, dtype=float)[None]
    return float(_margins(residuals(op, fn, X, rhs, zero_order), cert.sign)[0])


def certify_values(claim, samples, values, sign, bound, tolerance, detail="", extra=None) -> Certificate:
    """Certificate for ``values (sign) bound`` without an operator."""
    S = _as_samples(samples)
    r = np.asarray(values, dtype=float) - float(bound)
    return certificate_from_margins(claim, sign, S, _margins(r, sign), tolerance, detail, extra)


# ------------------------------------------------------------ counterexamples


@dataclass
class Bundle:
    name: str
    function: str
    certificates: list
    conclusion: str
    violated: str
    values: dict = field(default_factory=dict)

    @property
    def all_certified(self) -> bool:
        return all(c.verdict for c in self.certificates)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "function": self.function,
            "certificates": [c.to_dict() for c in self.certificates],
            "conclusion": self.conclusion,
            "violated_hypothesis": self.violated,
            "values": self.values,
        }

    def summary(self) -> str:
        lines = [f"counterexample {self.name}: u = {self.function}"]
        lines += ["  " + c.line() for c in self.certificates]
        lines.append(f"  {self.conclusion}")
        return "\n".join(lines)


COUNTEREXAMPLES = {
    "c1_degenerate": {
        "function": "exp_sin_sin",
        "ranges": [(-20.0, 20.0)],
        "residual_tol": 1e-10,
        "trace_tol": 1e-12,
        "peak": (0.0, np.pi / 2, np.pi / 2),
        "ray": (1.0, 0.0, 0.0),
        "violated": "growth hypothesis u+ = o(|x|) (u grows like e^{x1} along the unbounded axis)",
    },
    "quadratic_growth": {
        "function": "xsq_sin",
        "ranges": [(-1e4, 1e4)],
        "residual_tol": 1e-12,
        "trace_tol": 1e-12,
        "peak": (np.pi / 2, 1.0),
        "ray": (0.0, 1.0),
        "violated": "orthogonal_growth: Lambda(x) <= Lambda1 |x| (Lambda grows like x2^2)",
    },
}


def counterexample_report(name: str, n_samples: int = 1000, seed: int = 0, threads: int | None = None) -> Bundle:
    """Residual, boundary-trace and positivity certificates for a known counterexample."""
    if name not in COUNTEREXAMPLES:
        raise UnknownCounterexample(f"unknown counterexample {name!r}; known: {', '.join(COUNTEREXAMPLES)}")
    spec = COUNTEREXAMPLES[name]
    op, dom = preset(name)
    u = analytic(spec["function"])

    inner = interior_samples(dom, n_samples, seed, spec["ranges"])
    residual = certify_inequality(
        op, u, dom, inner, "==", 0.0, spec["residual_tol"], claim="F[u] = 0 in the domain", threads=threads
    )

    bdry = boundary_samples(dom, n_samples, seed + 1, spec["ranges"])
    trace = certify_values("u = 0 on the boundary", bdry, np.abs(u.value(bdry.points)), "<=", 0.0, spec["trace_tol"])

    peak = np.array(spec["peak"])
    ts = np.arange(0.0, 21.0)
    ray = line_samples(peak, spec["ray"], ts, f"ray {_fmt(peak)} + t e, t = 0..20")
    uray = u.value(ray.points)
    top = int(np.argmax(uray))
    best = SampleSet(ray.points[top : top + 1], ray.description + f", max over {len(ts)} points", None)
    positivity = certify_values("max u >= 1 in the interior", best, uray[top : top + 1], ">=", 1.0, 1e-12)
    norms = np.linalg.norm(ray.points, axis=1)
    values = {
        "u_at_peak": float(u.value(peak)),
        "ray_t": ts.tolist(),
        "ray_u": uray.tolist(),
        "ray_u_over_norm": (uray / norms).tolist(),
    }
    bundle = Bundle(
        name=name,
        function=u.formula,
        certificates=[residual, trace, positivity],
        conclusion="",
        violated=spec["violated"],
        values=values,
    )
    report = check_structure(op, dom, make_plan(dom, seed=seed))
    values["structure_failed_flags"] = report.failed_flags()
    values["all_bounded_directions_elliptic"] = report.all_bounded_directions_elliptic
    if "orthogonal_growth" in report.failed_flags():
        values["orthogonal_growth_witness"] = list(report.flags["orthogonal_growth"].witness.x)
    state = "reproduced" if bundle.all_certified else "NOT reproduced"
    bundle.conclusion = f"MP fails ({state}): F[u] = 0, u = 0 on the boundary, sup u >= 1; violated hypothesis: {bundle.violated}"
    return bundle


# ----------------------------------------------------------------- rescaling


def _scaled_linear(op: Linear, d: float) -> Linear:
    n = op.n
    A = [[ex.substitute_scaled(a, n, d) for a in row] for row in op.A]
    b = [ex.times(d, ex.substitute_scaled(v, n, d), n) for v in op.b]
    c = ex.times(d * d, ex.substitute_scaled(op.c, n, d), n)
    return Linear(n=n, A=A, b=b, c=c, name=f"{op.name}@scale{d:g}")


def _scaled_supinf(op: SupInf, d: float) -> SupInf:
    fams = tuple(
        tuple(LinearTerm(A=t.A, b=tuple(d * np.asarray(t.b)), c=d * d * t.c) for t in fam) for fam in op.families
    )
    return SupInf(families=fams, name=f"{op.name}@scale{d:g}")


def rescale_operator(op, d_h: float):
    """``G(y, s, p, M) = d^2 F(d y, s, p / d, M / d^2)``."""
    d = float(d_h)
    if not (math.isfinite(d) and d > 0):
        raise BadScale(f"scale must be finite and > 0, got {d_h}")
    if d == 1.0:
        return op
    if isinstance(op, Linear):
        return _scaled_linear(op, d)
    if isinstance(op, SupInf):
        return _scaled_supinf(op, d)

    def fn(y, s, p, M):
        return d * d * op(np.asarray(y) * d, s, np.asarray(p) / d, np.asarray(M) / (d * d))

    return CallableOp(op.n, fn, name=f"{getattr(op, 'name', 'op')}@scale{d:g}")


def rescale_function(fn, d: float, name: str | None = None) -> AnalyticFunction:
    """``v(y) = fn(d y)`` with its chain-rule derivatives."""

    def parts(Y):
        v, g, h = _rows_jet(fn, Y * d)
        return v, d * g, d * d * h

    n = fn.n if hasattr(fn, "n") else _dim_of(fn)
    return AnalyticFunction(name or f"{fn_name(fn)}(d y)", n, f"{fn_name(fn)}({d!r} y)", parts)


def _dim_of(fn) -> int:
    for attr in ("nu", "Q"):
        if hasattr(fn, attr):
            return np.asarray(getattr(fn, attr)).shape[0]
    raise MPLabError("cannot infer the dimension of the function")


# -------------------------------------------------------------- sponge limit


def global_Lambda1(report) -> float:
    """``max(Lambda1, sup Lambda(x)/|x|)`` over every structure sample (not only far rays)."""
    ratios = [lam / max(np.linalg.norm(x), 1e-300) for x, lam in report.Lambda_samples]
    return float(max([report.Lambda1] + ratios))


def _far_points(dom: CylinderSpec, radius: float, n_dirs: int, seed: int) -> np.ndarray:
    mid = (dom.offsets + 0.5 * dom.widths) @ dom.bounded_dirs
    m2 = float(mid @ mid)
    if radius * radius <= m2:
        raise MPLabError(f"radius {radius} is inside the bounded cross-section")
    t = math.sqrt(radius * radius - m2)
    U = dom.unbounded_dirs
    dirs = [U[i] for i in range(U.shape[0])] + [-U[i] for i in range(U.shape[0])]
    rng = np.random.default_rng(seed)
    while len(dirs) < n_dirs:
        w = rng.normal(size=U.shape[0]) @ U
        dirs.append(w / np.linalg.norm(w))
    return np.array([mid + t * w for w in dirs[: max(n_dirs, 2 * U.shape[0])]])


def sponge_limit_check(
    op,
    dom: CylinderSpec,
    eps_ladder=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
    Lambda1: float | None = None,
    n_dirs: int = 8,
    seed: int = 0,
    tolerance: float = DEFAULT_TOL,
) -> Certificate:
    """``F(x_eps, 0, 0, (eps/|x_eps|) Q) <= Lambda1 eps`` with ``|x_eps| = 1/eps``.

    ``Lambda1`` defaults to the sampled estimate from :func:`check_structure`.
    """
    if Lambda1 is None:
        Lambda1 = global_Lambda1(check_structure(op, dom, make_plan(dom, seed=seed)))
        source = "sup of Lambda(x)/|x| over the structure samples"
    else:
        source = "given"
    Q = projections(dom).Q
    pts, margins, vals, eps_col = [], [], [], []
    for eps in eps_ladder:
        X = _far_points(dom, 1.0 / eps, n_dirs, seed)
        norms = np.linalg.norm(X, axis=1)
        M = (eps / norms)[:, None, None] * Q[None]
        v = evaluate_batch(op, X, 0.0, np.zeros_like(X), M)
        pts.append(X)
        vals.append(v)
        margins.append(Lambda1 * eps - v)
        eps_col += [eps] * len(X)
    S = SampleSet(np.vstack(pts), f"|x| = 1/eps for eps in {list(eps_ladder)}", seed)
    values = {
        "Lambda1": Lambda1,
        "Lambda1_source": source,
        "eps": list(eps_ladder),
        "max_value_per_eps": [float(v.max()) for v in vals],
    }
    return certificate_from_margins(
        "F(x_eps, 0, 0, (eps/|x_eps|) Q) <= Lambda1 eps", "<=", S, np.concatenate(margins), tolerance, values=values
    )


# ------------------------------------------------------------- sup bound


def slab_parabola(dom: CylinderSpec, h: int = 0) -> AnalyticFunction:
    """``u = t (d - t) / 2`` with ``t = x.nu_h - a_h``; vanishes on both faces of slab ``h``."""
    nu = dom.bounded_dirs[h]
    a, d = float(dom.offsets[h]), float(dom.widths[h])
    nn = np.outer(nu, nu)
    n = dom.n

    def parts(X):
        t = X @ nu - a
        v = 0.5 * t * (d - t)
        g = (0.5 * d - t)[:, None] * nu[None]
        H = np.broadcast_to(-nn, (len(X), n, n)).copy()
        return v, g, H

    return AnalyticFunction(f"parabola[{h}]", n, f"t(d-t)/2, t = x.nu_{h} - {a:g}, d = {d:g}", parts)


@dataclass
class AbpComposite:
    alpha: float
    C1: float
    d: float
    Gamma: float
    sup_f_over_lambda: float
    sup_boundary_uplus: float
    bound: float
    interior: Certificate
    boundary: Certificate

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("alpha", "C1", "d", "Gamma", "sup_f_over_lambda", "sup_boundary_uplus", "bound")}
        d["interior"] = self.interior.to_dict()
        d["boundary"] = self.boundary.to_dict()
        return d


def abp_composite(
    op,
    dom: CylinderSpec,
    u,
    Gamma: float,
    sup_f_over_lambda: float,
    sup_boundary_uplus: float,
    h: int = 0,
    n_samples: int = 1000,
    seed: int = 0,
    ranges=None,
    tolerance: float = DEFAULT_TOL,
    threads: int | None = None,
) -> AbpComposite:
    """Certify ``G(y, 0, Dw, D^2 w) >= 0`` and ``w <= 0`` on the boundary in rescaled variables.

    ``y = x / d`` with ``d`` the width of slab ``h``; ``G`` is the rescaled
    operator, ``w = v + C1 e^{alpha (y.nu - a/d)} - sup u+ - C1 e^{alpha}``
    with ``v(y) = u(d y)`` (assumed >= 0, so ``u+ = u``), ``alpha = 1 + d Gamma``
    and ``C1 = d^2 sup(f-/lambda) / alpha``.
    """
    d = float(dom.widths[h])
    nu = dom.bounded_dirs[h]
    G = rescale_operator(op, d)
    alpha, C1 = abp_params(d * Gamma, d * d * sup_f_over_lambda)
    aux = AbpAux(C1, alpha, nu, offset=float(dom.offsets[h]) / d, width=1.0)
    v = rescale_function(u, d)
    shift = sup_boundary_uplus + C1 * math.exp(alpha)
    w = combine([(1.0, v), (1.0, aux), (1.0, constant(-shift, dom.n))], name="abp_w", n=dom.n)
    inner = interior_samples(dom, n_samples, seed, ranges)
    Y = SampleSet(inner.points / d, inner.description + f" / {d:g}", seed)
    interior = certify_inequality(
        G, w, dom, Y, ">=", 0.0, tolerance, claim="G(y, 0, Dw, D^2 w) >= 0", zero_order=False, threads=threads
    )
    bd = boundary_samples(dom, n_samples, seed + 1, ranges)
    face = bd.points[np.isclose(bd.points @ nu, dom.offsets[h]) | np.isclose(bd.points @ nu, dom.offsets[h] + d)]
    Yb = SampleSet(face / d, f"faces of slab {h} / {d:g}", seed + 1)
    boundary = certify_values("w <= 0 on the boundary", Yb, w.value(Yb.points), "<=", 0.0, tolerance)
    bound = abp_bound(d, Gamma, sup_f_over_lambda, sup_boundary_uplus)
    return AbpComposite(alpha, C1, d, Gamma, sup_f_over_lambda, sup_boundary_uplus, bound, interior, boundary)


# -------------------------------------------------------- comparison operator


def comparison_operator(op, v):
    """``G(x, s, p, M) = F(x, s + v, p + Dv, M + D^2 v) - F(x, v, Dv, D^2 v)``.

    For a linear ``F`` this is ``F`` itself; otherwise a callable wrapper.
    """
    if isinstance(op, Linear):
        return op

    def fn(x, s, p, M):
        X = np.asarray(x, dtype=float)[None]
        vv, g, H = _rows_jet(v, X)
        at = op.freeze(x)
        return at(s + vv[0], np.asarray(p) + g[0], np.asarray(M) + H[0]) - at(vv[0], g[0], H[0])

    return CallableOp(op.n, fn, name=f"{getattr(op, 'name', 'op')}-compared-to-{fn_name(v)}")
