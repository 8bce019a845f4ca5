"""Sampled checks of the structure conditions and the constants they yield.

Every verdict here is sampled evidence over a finite point set, never a
proof.  For :class:`~mplab.operators.Linear` operators the ellipticity,
growth, drift and zeroth-order estimates are read off the coefficients in
closed form, and for :class:`~mplab.operators.SupInf` families the
conservative member-wise bounds are used; callable operators are probed
with difference quotients.

The growth conditions are "as |x| -> infinity" statements.  They are tested
on a far annulus ``R_far <= |x| <= 2 R_far`` and along rays from each far
point: ``x = y + z`` is pushed to ``y + sigma z`` for ``sigma`` in
``ray_scales``.  A quantity that must stay bounded (or grow at most like
``|x|``) fails when its normalized value grows by more than
``growth_factor`` along some ray.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import DimensionMismatch, InsufficientSamples
from .geometry import CylinderSpec, projections
from .operators import Linear, SupInf

DEFAULT_TOL = 1e-10
LABEL = "sampled evidence, not proof"

FLAG_NAMES = (
    "continuity",
    "degenerate_ellipticity",
    "s_monotonicity",
    "normalization",
    "directional_ellipticity",
    "orthogonal_growth",
    "gradient_bound",
)
NARROW_FLAG = "one_sided_s_bound"


@dataclass(frozen=True)
class SamplePlan:
    interior_points: np.ndarray
    far_points: np.ndarray
    matrix_probes: tuple
    t_values: tuple
    p_probes: tuple
    s_probes: tuple
    base_matrices: tuple
    R_far: float
    seed: int
    ray_scales: tuple = (1.0, 2.0, 4.0, 8.0)

    def __post_init__(self):
        for D in self.matrix_probes:
            if np.linalg.eigvalsh(D)[0] < -1e-12:
                raise ValueError("matrix probes must be positive semidefinite")
        if any(t <= 0 for t in self.t_values) or any(s <= 0 for s in self.ray_scales):
            raise ValueError("t ladder and ray scales must be strictly positive")


def _unit_rows(rng, m, dim):
    v = rng.normal(size=(m, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def make_plan(
    dom: CylinderSpec,
    n_interior: int = 64,
    n_far: int = 32,
    R_far: float | None = None,
    seed: int = 0,
    t_values=(1.0, 1e-2, 1e-4),
    n_random_probes: int = 2,
) -> SamplePlan:
    """Low-discrepancy sample plan over a cylinder truncated at ``R_far``.

    ``R_far`` defaults to ``100 * max(widths)``.
    """
    n, k = dom.n, dom.k
    R_far = float(100.0 * np.max(dom.widths) if R_far is None else R_far)
    rng = np.random.default_rng(seed)
    sob = qmc.Sobol(d=n, scramble=True, seed=rng)
    u = sob.random(n_interior)
    y = dom.offsets + dom.widths * u[:, :k]
    z = -R_far + 2.0 * R_far * u[:, k:]
    interior = y @ dom.bounded_dirs + z @ dom.unbounded_dirs

    uf = sob.random(n_far)
    yf = dom.offsets + dom.widths * uf[:, :k]
    ybody = yf @ dom.bounded_dirs
    target = R_far * (1.0 + uf[:, k])
    zdir = _unit_rows(rng, n_far, n - k) @ dom.unbounded_dirs
    zlen = np.sqrt(np.maximum(target**2 - np.sum(ybody**2, axis=1), (0.5 * R_far) ** 2))
    far = ybody + zlen[:, None] * zdir

    pair = projections(dom)
    probes = [np.outer(v, v) for v in dom.bounded_dirs] + [pair.Q]
    for v in _unit_rows(rng, n_random_probes, n):
        probes.append(np.outer(v, v))
    G = rng.normal(size=(n, n))
    base = (np.zeros((n, n)), 0.5 * (G + G.T))
    p_probes = (np.zeros(n),) + tuple(rng.normal(size=(2, n)))
    return SamplePlan(
        interior_points=interior,
        far_points=far,
        matrix_probes=tuple(probes),
        t_values=tuple(float(t) for t in t_values),
        p_probes=p_probes,
        s_probes=(-1.0, 0.0, 1.0),
        base_matrices=base,
        R_far=R_far,
        seed=int(seed),
    )


@dataclass
class Witness:
    """Sample at which a quantity was evaluated: ``(F(hi) - F(lo)) / divisor``."""

    x: list
    hi: dict
    lo: dict | None
    divisor: float
    value: float
    note: str = ""

    def to_dict(self) -> dict:
        return {"x": self.x, "hi": self.hi, "lo": self.lo, "divisor": self.divisor, "value": self.value, "note": self.note}


def _pt(s, p, X) -> dict:
    return {"s": float(s), "p": np.asarray(p, dtype=float).tolist(), "X": np.asarray(X, dtype=float).tolist()}


def reproduce(op, w: Witness) -> float:
    """Recompute a witness value from scratch."""
    at = op.freeze(np.asarray(w.x, dtype=float))

    def ev(d):
        return at(d["s"], np.asarray(d["p"]), np.asarray(d["X"]))

    hi = ev(w.hi)
    lo = ev(w.lo) if w.lo is not None else 0.0
    return (hi - lo) / w.divisor


@dataclass
class Flag:
    passed: bool
    worst: float | None = None
    witness: Witness | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst": self.worst,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "detail": self.detail,
        }


@dataclass
class DirectionReport:
    index: int
    direction: list
    inf_lambda: float
    far_inf_lambda: float
    passed: bool
    witness: Witness | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "direction": self.direction,
            "inf_lambda": self.inf_lambda,
            "far_inf_lambda": self.far_inf_lambda,
            "passed": self.passed,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


@dataclass
class StructureReport:
    lambda_samples: list  # (x, lambda_hat) for the chosen direction
    ellipticity_dir: list | None
    ellipticity_index: int | None
    directions: list
    Lambda1: float
    Lambda_samples: list
    gamma_bound: float
    Gamma: float
    rho: float
    rho_finite: bool
    K: float | None
    K_finite: bool | None
    liminf_lambda_positive: bool
    all_bounded_directions_elliptic: bool
    flags: dict
    mode: str
    narrow: bool
    R_far: float
    seed: int
    n_samples: int
    tolerance: float
    label: str = LABEL
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.flags.values())

    def failed_flags(self) -> list:
        return [name for name, f in self.flags.items() if not f.passed]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mode": self.mode,
            "narrow": self.narrow,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "R_far": self.R_far,
            "n_samples": self.n_samples,
            "flags": {k: v.to_dict() for k, v in self.flags.items()},
            "constants": {
                "Lambda1": self.Lambda1,
                "gamma_bound": self.gamma_bound,
                "Gamma": self.Gamma,
                "rho": self.rho,
                "rho_finite": self.rho_finite,
                "K": self.K,
                "K_finite": self.K_finite,
            },
            "ellipticity_index": self.ellipticity_index,
            "ellipticity_dir": self.ellipticity_dir,
            "liminf_lambda_positive": self.liminf_lambda_positive,
            "all_bounded_directions_elliptic": self.all_bounded_directions_elliptic,
            "directions": [d.to_dict() for d in self.directions],
        }

    def summary(self) -> str:
        lines = [f"structure check ({self.label}; {self.n_samples} samples, seed {self.seed}, R_far {self.R_far:g})"]
        for name, f in self.flags.items():
            mark = "PASS" if f.passed else "FAIL"
            where = "" if f.passed or f.witness is None else f"  witness x={np.round(f.witness.x, 6).tolist()}"
            lines.append(f"  [{mark}] {name}{where}")
        for d in self.directions:
            lines.append(f"    direction {d.index}: inf lambda {d.inf_lambda:.6g} ({'ok' if d.passed else 'degenerate'})")
        lines.append(f"  Gamma={self.Gamma:.6g} Lambda1={self.Lambda1:.6g} rho={self.rho:.6g}{'' if self.rho_finite else ' (unbounded)'}")
        if self.narrow:
            lines.append(f"  K={self.K:.6g}{'' if self.K_finite else ' (unbounded)'}")
        return "\n".join(lines)


# ------------------------------------------------------------ per-point probes


def _stack(items):
    S = np.array([it[0] for it in items], dtype=float)
    P = np.array([it[1] for it in items], dtype=float)
    X = np.array([it[2] for it in items], dtype=float)
    return S, P, X


def _probe_point(op, x, dom, pair, plan):
    """All sampled quantities at one point: ``{name: (value, Witness)}``.

    Every (s, p, X) needed at ``x`` is evaluated in a single batched call.
    """
    n = dom.n
    at = op.freeze_many(x)
    xl = x.tolist()
    O = np.zeros((n, n))
    zero = np.zeros(n)
    pts = []

    def add(s, p, X):
        pts.append((float(s), p, X))
        return len(pts) - 1

    i_norm = add(0.0, zero, O)

    ell = []  # (hi, lo, t)
    for X in plan.base_matrices:
        for p in plan.p_probes:
            for s in (0.0, plan.s_probes[-1]):
                lo = add(s, p, X)
                for D in plan.matrix_probes:
                    for t in plan.t_values:
                        ell.append((add(s, p, X + t * D), lo, t))

    ss = sorted(plan.s_probes)
    smono = []  # (hi, lo, ds)
    for X in plan.base_matrices:
        for p in plan.p_probes:
            idx = [add(s, p, X) for s in ss]
            for a in range(len(ss)):
                for b in range(a + 1, len(ss)):
                    smono.append((idx[b], idx[a], ss[b] - ss[a]))

    lam = []
    for nu in dom.bounded_dirs:
        D = np.outer(nu, nu)
        rows = []
        for X in plan.base_matrices:
            for p in plan.p_probes:
                lo = add(0.0, p, X)
                for t in plan.t_values:
                    rows.append((add(0.0, p, X + t * D), lo, t))
        lam.append(rows)

    grow = []
    for X in plan.base_matrices:
        lo = add(0.0, zero, X)
        for t in plan.t_values:
            grow.append((add(0.0, zero, X + t * pair.Q), lo, t))

    grad = []
    for X in plan.base_matrices:
        idx = [add(0.0, p, X) for p in plan.p_probes]
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                dp = float(np.linalg.norm(plan.p_probes[a] - plan.p_probes[b]))
                grad.append((idx[a], idx[b], dp))

    S, P, X = _stack(pts)
    vals = at(S, P, X)

    def witness(hi, lo, div, note):
        v = (vals[hi] - (vals[lo] if lo is not None else 0.0)) / div
        return v, Witness(xl, _pt(*pts[hi]), None if lo is None else _pt(*pts[lo]), float(div), float(v), note)

    def extreme(rows, note, sign):
        q = np.array([(vals[h] - vals[l]) / d for h, l, d in rows])
        i = int(np.argmin(q) if sign < 0 else np.argmax(q))
        return witness(rows[i][0], rows[i][1], rows[i][2], note)

    out = {}
    v, w = witness(i_norm, None, 1.0, "F(x,0,0,O)")
    out["normalization"] = (abs(v), w)
    out["degenerate_ellipticity"] = extreme(ell, "ellipticity quotient", -1)
    diffs = [(h, l, 1.0) for h, l, _ in smono]
    out["s_monotonicity"] = extreme(diffs, "F(s2)-F(s1), s2>s1", +1)
    out["c"] = extreme(smono, "s slope", +1)
    out["lambda"] = [extreme(rows, "directional quotient", -1) for rows in lam]
    out["Lambda"] = extreme(grow, "Q quotient", +1)
    g = np.array([abs(vals[a] - vals[b]) / d for a, b, d in grad])
    i = int(np.argmax(g))
    out["gamma"] = (float(g[i]), witness(grad[i][0], grad[i][1], grad[i][2], "p quotient")[1])

    # continuity: joint perturbation of (x, s, p, X)
    seed = int(np.frombuffer(np.round(x, 12).tobytes(), dtype=np.uint32).sum()) % (2**32)
    rng = np.random.default_rng(seed)
    e = rng.normal(size=n)
    dX = rng.normal(size=(n, n))
    dX = 0.5 * (dX + dX.T)
    delta = 1e-8
    Xb, pb = plan.base_matrices[-1], plan.p_probes[-1]
    F1 = at(np.array([0.5]), pb[None], Xb[None])[0]
    F2 = op.freeze_many(x + delta * e)(np.array([0.5 + delta]), (pb + delta * e)[None], (Xb + delta * dX)[None])[0]
    jump = abs(F2 - F1) / (1.0 + abs(F1))
    out["continuity"] = (float(jump), Witness(xl, _pt(0.5, pb, Xb), None, 1.0, float(F1), f"relative jump {jump:.3e}"))
    return out


def _analytic_linear(op: Linear, x, dom, pair):
    A, b, c = op.coefficients(x)
    lam = [float(nu @ A @ nu) for nu in dom.bounded_dirs]
    Lam = float(np.sum(A * pair.Q))
    gam = float(np.linalg.norm(b))
    return lam, Lam, gam, float(c)


def supinf_bounds(op, dom) -> dict:
    """Closed-form bounds for a constant-coefficient sup-inf family."""
    pair = projections(dom)
    terms = list(op.terms())
    return {
        "lambda": [min(float(nu @ t.A @ nu) for t in terms) for nu in dom.bounded_dirs],
        "Lambda": max(float(np.sum(t.A * pair.Q)) for t in terms),
        "gamma": max(float(np.linalg.norm(t.b)) for t in terms),
        "c": max(t.c for t in terms),
    }


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _ray_growth(values_by_scale, norms_by_scale, factor, tol, normalize_by_norm):
    """Worst growth ratio along rays; returns (ratio, ray index, scale index)."""
    v = np.asarray(values_by_scale, dtype=float)
    if normalize_by_norm:
        v = v / np.asarray(norms_by_scale)
    base = np.maximum(v[:, 0], 0.0)
    last = v[:, -1]
    excess = last - (factor * base + tol)
    i = int(np.argmax(excess))
    return float(excess[i]), i


def check_structure(
    op,
    dom: CylinderSpec,
    plan: SamplePlan,
    tol: float = DEFAULT_TOL,
    mode: str = "auto",
    narrow: bool = False,
    Lambda1: float | None = None,
    growth_factor: float = 2.0,
    threads: int | None = None,
) -> StructureReport:
    """Check the structure conditions of ``op`` on ``dom`` over ``plan``.

    ``mode="auto"`` reads lambda, Lambda, gamma and c from the coefficients
    of a :class:`Linear` operator and probes everything else; ``"sampled"``
    forces probing.  With ``narrow=True`` the monotonicity in ``s`` is
    replaced by a one-sided bound and the constant ``K`` is estimated.
    ``Lambda1`` optionally pins the linear growth constant; otherwise
    growth is judged along rays (see module docstring).
    """
    if op.n != dom.n:
        raise DimensionMismatch(f"operator dimension {op.n} != domain dimension {dom.n}")
    if len(plan.interior_points) < 8:
        raise InsufficientSamples(f"need >= 8 interior points, got {len(plan.interior_points)}")
    analytic = mode == "auto" and isinstance(op, (Linear, SupInf))
    pair = projections(dom)
    k = dom.k

    far = np.asarray(plan.far_points, dtype=float)
    y = far @ pair.P
    z = far @ pair.Q
    scales = plan.ray_scales
    rays = [y + s * z for s in scales]  # rays[0] == far (up to rounding)
    interior = np.asarray(plan.interior_points, dtype=float)
    points = np.vstack([interior] + rays)
    n_int, n_far = len(interior), len(far)
    probes = _map(lambda x: _probe_point(op, x, dom, pair, plan), list(points), threads)

    if analytic and isinstance(op, SupInf):
        sb = supinf_bounds(op, dom)
        m = len(points)
        lam = np.tile(np.array(sb["lambda"]), (m, 1))
        Lam = np.full(m, sb["Lambda"])
        gam = np.full(m, sb["gamma"])
        cvals = np.full(m, sb["c"])
    elif analytic:
        vals = [_analytic_linear(op, x, dom, pair) for x in points]
        lam = np.array([v[0] for v in vals])
        Lam = np.array([v[1] for v in vals])
        gam = np.array([v[2] for v in vals])
        cvals = np.array([v[3] for v in vals])
    else:
        lam = np.array([[pr["lambda"][h][0] for h in range(k)] for pr in probes])
        Lam = np.array([pr["Lambda"][0] for pr in probes])
        gam = np.array([pr["gamma"][0] for pr in probes])
        cvals = np.array([pr["c"][0] for pr in probes])
    norms = np.linalg.norm(points, axis=1)
    far_slice = slice(n_int, len(points))

    flags = {}

    def worst_of(key, sign):
        vals_ = np.array([pr[key][0] for pr in probes])
        i = int(np.argmax(vals_) if sign > 0 else np.argmin(vals_))
        return vals_[i], probes[i][key][1]

    v, w = worst_of("continuity", +1)
    flags["continuity"] = Flag(v <= 1e-5, v, w, "joint perturbation of size 1e-8")
    v, w = worst_of("degenerate_ellipticity", -1)
    flags["degenerate_ellipticity"] = Flag(v >= -tol, v, w, "min quotient over psd probes")
    v, w = worst_of("s_monotonicity", +1)
    if not narrow:
        flags["s_monotonicity"] = Flag(v <= tol, v, w, "max F(s2)-F(s1) for s2 > s1")
    v, w = worst_of("normalization", +1)
    flags["normalization"] = Flag(v <= tol, v, w, "max |F(x,0,0,O)|")

    # one-directional ellipticity per direction, liminf on the far shell
    directions = []
    for h in range(k):
        col = lam[:, h]
        i = int(np.argmin(col))
        far_inf = float(np.min(col[far_slice]))
        passed = bool(col[i] > tol and far_inf > tol)
        directions.append(
            DirectionReport(h, dom.bounded_dirs[h].tolist(), float(col[i]), far_inf, passed, probes[i]["lambda"][h][1])
        )
    good = [d for d in directions if d.passed]
    chosen = max(good or directions, key=lambda d: (d.inf_lambda, -d.index))
    hsel = chosen.index
    lam_sel = lam[:, hsel]
    flags["directional_ellipticity"] = Flag(
        bool(good),
        chosen.inf_lambda,
        None if good else chosen.witness,
        f"best direction {hsel}; strictly positive lambda needed in one bounded direction",
    )
    liminf_ok = chosen.far_inf_lambda > tol

    # growth in the unbounded directions
    Lam_pos = np.maximum(Lam, 0.0)
    ray_Lam = Lam_pos[far_slice].reshape(len(scales), n_far).T
    ray_norm = norms[far_slice].reshape(len(scales), n_far).T
    Lambda1_est = float(np.max(ray_Lam / ray_norm))
    if Lambda1 is not None:
        excess = Lam_pos[far_slice] - (Lambda1 * norms[far_slice] + tol)
        i = int(np.argmax(excess))
        ok = excess[i] <= 0
        idx = n_int + i
        detail = f"Lambda(x) <= {Lambda1:g}|x| on |x| >= R_far"
        Lambda1_rep = float(Lambda1)
    else:
        excess_v, j = _ray_growth(ray_Lam, ray_norm, growth_factor, tol, True)
        ok = excess_v <= 0
        idx = n_int + (len(scales) - 1) * n_far + j
        detail = f"Lambda(x)/|x| grows by <= {growth_factor:g}x along rays scaled by {scales[-1]:g}"
        Lambda1_rep = Lambda1_est
    flags["orthogonal_growth"] = Flag(bool(ok), float(Lam[idx] / norms[idx]), None if ok else probes[idx]["Lambda"][1], detail)

    # first-order bound
    ray_gam = gam[far_slice].reshape(len(scales), n_far).T
    excess_g, j = _ray_growth(ray_gam, None, growth_factor, tol, False)
    gam_ok = excess_g <= 0 and np.all(np.isfinite(gam))
    gidx = n_int + (len(scales) - 1) * n_far + j
    flags["gradient_bound"] = Flag(bool(gam_ok), float(np.max(gam)), None if gam_ok else probes[gidx]["gamma"][1], "gamma bounded; Gamma = sup gamma/lambda")

    with np.errstate(divide="ignore", invalid="ignore"):
        Gamma = float(np.max(np.where(lam_sel > 0, gam / lam_sel, np.inf)))
        ratio = np.where(lam_sel > 0, Lam_pos / lam_sel, np.inf)
    rho = float(np.max(ratio))
    ray_rho = ratio[far_slice].reshape(len(scales), n_far).T
    rho_finite = bool(np.isfinite(rho) and _ray_growth(ray_rho, None, growth_factor, tol, False)[0] <= 0)

    K = K_finite = None
    if narrow:
        with np.errstate(divide="ignore", invalid="ignore"):
            kr = np.where(lam_sel > 0, np.maximum(cvals, 0.0) / lam_sel, np.inf)
        K = float(np.max(kr))
        ray_k = kr[far_slice].reshape(len(scales), n_far).T
        excess_k, j = _ray_growth(ray_k, None, growth_factor, tol, False)
        K_finite = bool(np.isfinite(K) and excess_k <= 0)
        kidx = n_int + (len(scales) - 1) * n_far + j
        flags[NARROW_FLAG] = Flag(K_finite, K, None if K_finite else probes[kidx]["c"][1], "c(x)/lambda(x) <= K < infinity")

    ordered = {name: flags[name] for name in FLAG_NAMES + (NARROW_FLAG,) if name in flags}
    return StructureReport(
        lambda_samples=[(points[i].tolist(), float(lam_sel[i])) for i in range(len(points))],
        ellipticity_dir=chosen.direction,
        ellipticity_index=hsel,
        directions=directions,
        Lambda1=Lambda1_rep,
        Lambda_samples=[(points[i].tolist(), float(Lam[i])) for i in range(len(points))],
        gamma_bound=float(np.max(gam)),
        Gamma=max(Gamma, 0.0),
        rho=rho,
        rho_finite=rho_finite,
        K=K,
        K_finite=K_finite,
        liminf_lambda_positive=bool(liminf_ok),
        all_bounded_directions_elliptic=all(d.passed for d in directions),
        flags=ordered,
        mode="analytic" if analytic else "sampled",
        narrow=narrow,
        R_far=plan.R_far,
        seed=plan.seed,
        n_samples=len(points),
        tolerance=tol,
        extras={"probes": probes, "points": points, "lambda_all": lam, "Lambda_all": Lam, "gamma_all": gam, "c_all": cvals},
    )


def check_narrow_mode(op, dom, plan, **kwargs) -> StructureReport:
    return check_structure(op, dom, plan, narrow=True, **kwargs)
