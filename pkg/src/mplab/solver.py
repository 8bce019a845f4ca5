"""Monotone finite-difference solver on frame-aligned truncated boxes.

Second differences along each frame axis, upwind first differences for the
drift and a pointwise zeroth-order term.  Linear problems are solved by a
sparse direct factorization or red-black Gauss-Seidel; sup-inf problems by
nested policy iteration.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import expressions as ex
from .errors import DimensionMismatch, MPLabError, NoConvergence, NonMonotoneStencil
from .geometry import CylinderSpec, LatticeSpec, contains, in_node_region, strictly_contains
from .operators import Linear, SupInf

log = logging.getLogger(__name__)

OUTSIDE, INTERIOR, PHYSICAL, ARTIFICIAL = 0, 1, 2, 3
KIND_NAMES = {OUTSIDE: "outside", INTERIOR: "interior", PHYSICAL: "physical boundary", ARTIFICIAL: "truncation face"}
DIAG_TOL = 1e-12


# ---------------------------------------------------------------------- grid


@dataclass(eq=False)
class Grid:
    """Tensor grid on a box in frame coordinates ``y = frame @ x``."""

    frame: np.ndarray  # (n, n), rows are the axes
    lo: np.ndarray
    hi: np.ndarray
    cells: tuple
    kind: np.ndarray  # node classification, flat C-order
    domain: object = None

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return tuple(c + 1 for c in self.cells)

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / np.array(self.cells, dtype=float)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_values(self, i: int) -> np.ndarray:
        return self.lo[i] + self.spacing[i] * np.arange(self.cells[i] + 1)

    @property
    def coords(self) -> np.ndarray:
        axes = [self.axis_values(i) for i in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @property
    def points(self) -> np.ndarray:
        return self.coords @ self.frame

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.kind == INTERIOR)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero((self.kind == PHYSICAL) | (self.kind == ARTIFICIAL))

    def index_map(self) -> np.ndarray:
        """Node -> unknown index for interior nodes, -1 elsewhere."""
        idx = -np.ones(self.size, dtype=np.int64)
        inner = self.interior
        idx[inner] = np.arange(len(inner))
        return idx

    def counts(self) -> dict:
        return {KIND_NAMES[k]: int(np.sum(self.kind == k)) for k in KIND_NAMES}


def _cells(length: float, h: float) -> int:
    if not (h > 0 and math.isfinite(h)):
        raise MPLabError("grid spacing must be finite and > 0")
    return max(2, int(round(length / h)))


def make_grid(dom, h, R: float = 10.0, ranges=None, box=None) -> Grid:
    """Grid for a cylinder (frame-aligned box) or an axis-aligned lattice.

    For a cylinder the bounded axes span ``[a_h, a_h + d_h]`` and each
    unbounded axis spans ``ranges[i]`` (default ``[-R, R]``).  For a lattice
    ``box = (lo, hi)`` is required in ambient coordinates.
    """
    if isinstance(dom, LatticeSpec):
        return _lattice_grid(dom, h, box)
    n, k = dom.n, dom.k
    if ranges is None:
        ranges = [(-float(R), float(R))] * (n - k)
    elif len(ranges) == 2 and np.isscalar(ranges[0]):
        ranges = [tuple(ranges)] * (n - k)
    lo = np.concatenate([dom.offsets, [r[0] for r in ranges]]).astype(float)
    hi = np.concatenate([dom.offsets + dom.widths, [r[1] for r in ranges]]).astype(float)
    hs = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    cells = tuple(_cells(hi[i] - lo[i], hs[i]) for i in range(n))
    shape = tuple(c + 1 for c in cells)
    idx = np.indices(shape).reshape(n, -1).T
    at_lo = idx == 0
    at_hi = idx == np.array(cells)
    face = at_lo | at_hi
    kind = np.full(len(idx), INTERIOR, dtype=np.int8)
    kind[np.any(face[:, k:], axis=1)] = ARTIFICIAL
    kind[np.any(face[:, :k], axis=1)] = PHYSICAL
    return Grid(dom.frame.copy(), lo, hi, cells, kind, dom)


def _lattice_grid(lat: LatticeSpec, h, box) -> Grid:
    if box is None:
        raise MPLabError("lattice grids need an explicit box (lo, hi)")
    for c in lat.cylinders:
        if not np.all(np.isin(np.abs(c.bounded_dirs), (0.0, 1.0))):
            raise MPLabError("lattice grids need axis-aligned cylinders")
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    n = lat.n
    hs = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    cells = tuple(_cells(hi[i] - lo[i], hs[i]) for i in range(n))
    g = Grid(np.eye(n), lo, hi, cells, np.zeros(int(np.prod([c + 1 for c in cells])), dtype=np.int8), lat)
    x = g.points
    shape = g.shape
    idx = np.indices(shape).reshape(n, -1).T
    box_face = np.any((idx == 0) | (idx == np.array(cells)), axis=1)
    inside = contains(lat, x)
    strict = strictly_contains(lat, x)
    kind = np.full(len(x), OUTSIDE, dtype=np.int8)
    kind[inside] = PHYSICAL
    kind[strict] = INTERIOR
    kind[inside & box_face] = ARTIFICIAL
    g.kind = kind
    return g


# --------------------------------------------------------------------- fields


@dataclass(eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.size,):
            raise DimensionMismatch("field length must equal the node count")
        if not np.all(np.isfinite(self.values[self.grid.kind != OUTSIDE])):
            raise MPLabError("field has non-finite values")

    def to_csv(self, path=None) -> str:
        """CSV with one column per ambient coordinate then ``value``."""
        mask = self.grid.kind != OUTSIDE
        X = self.grid.points[mask]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(self.grid.n)] + ["value"])
        for row, v in zip(X, self.values[mask]):
            w.writerow([repr(float(c)) for c in row] + [repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _field_values(spec, X) -> np.ndarray:
    if spec is None:
        return np.zeros(len(X))
    if callable(spec):
        return np.broadcast_to(np.asarray(spec(X), dtype=float), (len(X),)).copy()
    if isinstance(spec, str):
        return np.broadcast_to(np.asarray(ex.compile_expr(spec, X.shape[1])(X), dtype=float), (len(X),)).copy()
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(len(X), float(arr))
    if arr.shape != (len(X),):
        raise DimensionMismatch("array-valued data must have one entry per node")
    return arr.copy()


def _node_data(spec, X, idx, size) -> np.ndarray:
    """Data on the nodes ``idx``; arrays may cover every node of the grid."""
    if isinstance(spec, np.ndarray) and spec.shape == (size,):
        return spec[idx].astype(float)
    return _field_values(spec, X[idx])


# ------------------------------------------------------------- discretization


@dataclass(eq=False)
class Discrete:
    """``(L u)_i = diag_i u_i + sum_j w_ij u_j`` on interior rows; off-diagonal weights >= 0."""

    grid: Grid
    matrices: list  # one CSR matrix (n_interior x n_nodes) per linear term
    family_shape: tuple | None = None  # (n_alpha, n_beta) for sup-inf
    min_offdiag: float = 0.0

    def apply(self, u) -> np.ndarray:
        """All term values, shape (n_terms, n_interior)."""
        return np.stack([M @ u for M in self.matrices])


def _frame_coefficients(grid: Grid, A, b):
    F = grid.frame
    A_f = np.einsum("ia,mab,jb->mij", F, A, F)
    b_f = b @ F.T
    return A_f, b_f


def _stencil(grid: Grid, A_f, b_f, c, rows):
    """Assemble a CSR block for the interior ``rows`` (node indices)."""
    n = grid.n
    shape = grid.shape
    hs = grid.spacing
    m = len(rows)
    off = np.abs(A_f - np.einsum("mii->mi", A_f)[:, :, None] * np.eye(n)[None])
    scale = 1.0 + np.max(np.abs(A_f), axis=(1, 2))
    bad = np.flatnonzero(np.max(off, axis=(1, 2)) > DIAG_TOL * scale)
    if bad.size:
        node = int(rows[bad[0]])
        raise NonMonotoneStencil(
            f"A is not diagonal in the grid frame at x={grid.points[node].tolist()} (cross-derivative terms)", node
        )
    multi = np.array(np.unravel_index(rows, shape)).T
    strides = np.array([int(np.prod(shape[i + 1 :])) for i in range(n)])
    data, cols, row_idx = [], [], []
    diag = np.array(c, dtype=float).reshape(-1) * np.ones(m)
    for i in range(n):
        a = A_f[:, i, i]
        bi = b_f[:, i]
        h = hs[i]
        wp = a / h**2 + np.maximum(bi, 0.0) / h
        wm = a / h**2 + np.maximum(-bi, 0.0) / h
        diag = diag - wp - wm
        for w, step in ((wp, 1), (wm, -1)):
            neighbour = multi[:, i] + step
            if np.any((neighbour < 0) | (neighbour >= shape[i])):
                raise MPLabError("interior node touches the edge of the grid")
            cols.append(rows + step * strides[i])
            data.append(w)
            row_idx.append(np.arange(m))
    cols.append(rows)
    data.append(diag)
    row_idx.append(np.arange(m))
    data = np.concatenate(data)
    offd = data[:-m]
    min_off = float(offd.min()) if offd.size else 0.0
    if min_off < 0:
        j = int(np.argmin(offd)) % m
        node = int(rows[j])
        raise NonMonotoneStencil(f"negative stencil weight {min_off:.3e} at x={grid.points[node].tolist()}", node)
    M = sp.csr_matrix((data, (np.concatenate(row_idx), np.concatenate(cols))), shape=(m, grid.size))
    M.sum_duplicates()
    return M, min_off


def discretize(op, grid: Grid) -> Discrete:
    """Monotone stencil for a :class:`Linear` or :class:`SupInf` operator.

    Raises :class:`NonMonotoneStencil` with the offending node when ``A`` has
    cross terms in the grid frame or a weight would be negative.
    """
    rows = grid.interior
    if isinstance(op, Linear):
        X = grid.points[rows]
        A, b, c = op.coefficients(X)
        A_f, b_f = _frame_coefficients(grid, A, b)
        M, mo = _stencil(grid, A_f, b_f, c, rows)
        return Discrete(grid, [M], None, mo)
    if isinstance(op, SupInf):
        mats, mo = [], math.inf
        m = len(rows)
        for fam in op.families:
            for t in fam:
                A_f, b_f = _frame_coefficients(grid, np.broadcast_to(t.A, (m, grid.n, grid.n)), np.broadcast_to(t.b, (m, grid.n)))
                M, o = _stencil(grid, A_f, b_f, np.full(m, t.c), rows)
                mats.append(M)
                mo = min(mo, o)
        sizes = {len(f) for f in op.families}
        if len(sizes) != 1:
            raise MPLabError("sup-inf families must all have the same number of terms")
        return Discrete(grid, mats, (len(op.families), sizes.pop()), mo)
    raise MPLabError(f"cannot discretize {type(op).__name__}; only Linear and SupInf operators")


def apply_operator(disc: Discrete, u) -> np.ndarray:
    """``F_h[u]`` on interior nodes."""
    vals = disc.apply(u)
    if disc.family_shape is None:
        return vals[0]
    na, nb = disc.family_shape
    return vals.reshape(na, nb, -1).min(axis=1).max(axis=0)


# -------------------------------------------------------------------- solving


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float
    max_value: float
    argmax: list
    argmax_kind: str
    boundary_max: float
    interior_max: float
    converged: bool
    policy_iterations: int = 0
    policy_switches: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    h: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def summary(self) -> str:
        lines = [
            f"solve [{self.method}] converged={self.converged} iterations={self.iterations} residual={self.residual:.3e}",
            f"  max u = {self.max_value:.12g} at {np.round(self.argmax, 9).tolist()} ({self.argmax_kind}); "
            f"boundary max {self.boundary_max:.12g}; interior max {self.interior_max:.12g}",
            f"  nodes: {self.counts}; h = {self.h}",
        ]
        if self.policy_iterations:
            lines.append(f"  policy iterations {self.policy_iterations}, switches {self.policy_switches}")
        return "\n".join(lines)


def _split(disc: Discrete, M):
    grid = disc.grid
    inner = grid.interior
    return M[:, inner].tocsr(), M


def _rhs(M_full, inner, f_in, u_full):
    ub = u_full.copy()
    ub[inner] = 0.0
    return f_in - M_full @ ub


def _gauss_seidel(A, rhs, x0, grid, inner, tol, max_sweeps, omega=1.0):
    """Red-black (multicolour) Gauss-Seidel with stall-triggered damping halving."""
    multi = np.array(np.unravel_index(inner, grid.shape)).T
    colour = np.sum(multi, axis=1) % 2
    groups = [np.flatnonzero(colour == c) for c in (0, 1)]
    D = A.diagonal()
    rows = [A[g] for g in groups]
    x = x0.copy()
    history = []
    best = math.inf
    stall = 0
    for sweep in range(1, max_sweeps + 1):
        for g, Ag in zip(groups, rows):
            r = rhs[g] - Ag @ x
            x[g] += omega * r / D[g]
        res = float(np.max(np.abs(rhs - A @ x), initial=0.0))
        history.append(res)
        if res <= tol:
            return x, sweep, res
        if res < 0.999 * best:
            best, stall = res, 0
        else:
            stall += 1
            if stall > 50:
                omega *= 0.5
                stall = 0
    raise NoConvergence(f"Gauss-Seidel did not reach {tol:g}", max_sweeps, history[-1])


def _linear_solve(A, rhs, x0, grid, inner, method, tol, max_sweeps):
    if method == "direct":
        x = spla.spsolve(A.tocsc(), rhs)
        return x, 1
    if method == "gauss-seidel":
        x, sweeps, _ = _gauss_seidel(A, rhs, x0, grid, inner, tol, max_sweeps)
        return x, sweeps
    raise MPLabError(f"unknown method {method!r}")


def solve_dirichlet(
    op,
    grid: Grid,
    f=0.0,
    g=0.0,
    method: str = "direct",
    tol: float = 1e-10,
    max_sweeps: int = 100_000,
    max_policy: int = 100,
    disc: Discrete | None = None,
) -> tuple[Field, SolveReport]:
    """Solve ``F_h[u] = f`` on interior nodes with ``u = g`` on boundary nodes."""
    disc = disc or discretize(op, grid)
    X = grid.points
    inner = grid.interior
    bdry = grid.boundary
    u = np.zeros(grid.size)
    u[bdry] = _node_data(g, X, bdry, grid.size)
    f_in = _node_data(f, X, inner, grid.size)
    if disc.family_shape is None:
        A, M = _split(disc, disc.matrices[0])
        x, its = _linear_solve(A, _rhs(M, inner, f_in, u), u[inner], grid, inner, method, tol, max_sweeps)
        u[inner] = x
        res = float(np.max(np.abs(apply_operator(disc, u) - f_in), initial=0.0))
        return _finish(grid, u, res, method, its, res <= max(tol, 1e-9 * (1.0 + np.max(np.abs(f_in), initial=0.0))), disc)
    return _policy_iteration(disc, grid, u, f_in, tol, max_policy)


def _policy_iteration(disc, grid, u, f_in, tol, max_policy):
    """Howard iteration for ``max_a min_b (L_ab u) = f`` with a residual line search.

    Each step freezes the argmax/argmin policies at the current iterate,
    solves the resulting linear system and moves towards its solution by
    the largest step in ``1, 1/2, 1/4, ...`` that does not increase the
    sup-norm residual.  Once the policy is stable the full step is exact.
    """
    inner = grid.interior
    na, nb = disc.family_shape
    mats = [_split(disc, M) for M in disc.matrices]
    m = len(inner)
    rows = np.arange(m)

    def state(uu):
        vals = np.stack([mt[1] @ uu for mt in mats]).reshape(na, nb, m)
        return vals, float(np.max(np.abs(vals.min(axis=1).max(axis=0) - f_in), initial=0.0))

    vals, res = state(u)
    history, switches, steps = [res], [], []
    pick_prev = None
    monotone = True
    for it in range(1, max_policy + 1):
        beta = np.argmin(vals, axis=1)  # (na, m)
        mins = np.take_along_axis(vals, beta[:, None, :], axis=1)[:, 0, :]
        alpha = np.argmax(mins, axis=0)
        pick = alpha * nb + beta[alpha, rows]
        switches.append(int(m if pick_prev is None else np.sum(pick != pick_prev)))
        pick_prev = pick
        A, M = _rowpick([mt[0] for mt in mats], pick), _rowpick([mt[1] for mt in mats], pick)
        target = u.copy()
        target[inner] = spla.spsolve(A.tocsc(), _rhs(M, inner, f_in, u))
        t = 1.0
        while True:
            trial = u + t * (target - u)
            vals_t, res_t = state(trial)
            if res_t <= res or t < 2.0**-20:
                break
            t *= 0.5
        monotone &= res_t <= res
        steps.append(t)
        log.debug("policy iteration %d: %d switches, step %g, residual %.3e", it, switches[-1], t, res_t)
        u, vals, res = trial, vals_t, res_t
        history.append(res)
        if res <= tol:
            field_, rep = _finish(grid, u, res, "policy-iteration", it, True, disc)
            rep.policy_iterations = it
            rep.policy_switches = switches
            rep.residual_history = history
            rep.extra = {"residual_monotone": bool(monotone), "steps": steps}
            return field_, rep
    raise NoConvergence("policy iteration did not reach the residual tolerance", max_policy, res)


def _rowpick(mats, pick):
    """Row ``i`` of the result is row ``i`` of ``mats[pick[i]]``."""
    out = None
    for t, M in enumerate(mats):
        mask = sp.diags((pick == t).astype(float))
        part = mask @ M
        out = part if out is None else out + part
    return out.tocsr()


def _finish(grid, u, res, method, its, converged, disc) -> tuple[Field, SolveReport]:
    mask = grid.kind != OUTSIDE
    vals = np.where(mask, u, -np.inf)
    top = int(np.argmax(vals))
    inner = grid.interior
    bdry = grid.boundary
    report = SolveReport(
        method=method,
        iterations=int(its),
        residual=float(res),
        max_value=float(u[top]),
        argmax=grid.points[top].tolist(),
        argmax_kind=KIND_NAMES[int(grid.kind[top])],
        boundary_max=float(np.max(u[bdry])) if bdry.size else -math.inf,
        interior_max=float(np.max(u[inner])) if inner.size else -math.inf,
        converged=bool(converged),
        counts=grid.counts(),
        h=grid.spacing.tolist(),
    )
    return Field(grid, u), report


def discrete_residual(disc: Discrete, field_: Field, f=0.0) -> float:
    """Recompute ``max |F_h[u] - f|`` from a returned field."""
    X = disc.grid.points[disc.grid.interior]
    return float(np.max(np.abs(apply_operator(disc, field_.values) - _field_values(f, X)), initial=0.0))


# ------------------------------------------------------------ MP experiments


@dataclass
class MPVerdict:
    name: str
    verdict: bool | None
    status: str
    reports: list
    details: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "status": self.status,
            "reports": [r.to_dict() for r in self.reports],
            "details": self.details,
        }

    def summary(self) -> str:
        head = {True: "PASS", False: "FAIL", None: "NO VERDICT"}[self.verdict]
        lines = [f"[{head}] {self.name}: {self.status}"]
        lines += ["  " + r.summary().replace("\n", "\n  ") for r in self.reports]
        return "\n".join(lines)


def empirical_mp_check(
    op,
    dom: CylinderSpec,
    h: float = 0.1,
    R: float = 10.0,
    f_variants=(0.0,),
    g=0.0,
    tol: float = 1e-10,
    method: str = "direct",
) -> MPVerdict:
    """Solve with each ``f >= 0`` variant and boundary data ``g <= 0``; pass iff max u <= tol."""
    grid = make_grid(dom, h, R)
    disc = discretize(op, grid)
    reports, fields = [], {}
    for i, f in enumerate(f_variants):
        fld, rep = solve_dirichlet(op, grid, f, g, method=method, disc=disc)
        reports.append(rep)
        fields[f"mp_rhs{i}"] = fld
    worst = max(r.max_value for r in reports)
    ok = worst <= tol
    return MPVerdict(
        "empirical MP",
        ok,
        f"max u = {worst:.3e} ({'<=' if ok else '>'} {tol:g}) over {len(reports)} right-hand sides",
        reports,
        {"R": R, "h": h, "faces": "physical faces and truncation faces both carry g"},
        fields,
    )


def violation_study(op, dom: CylinderSpec, u_exact, h: float, R_ladder=(2.0, 4.0, 6.0), method: str = "direct") -> MPVerdict:
    """Boundary data equal to ``u_exact`` (zero on physical faces) on growing truncations.

    Reports the interior maximum per ``R``; the scenario reproduces the
    failure when it is positive and increasing in ``R``.
    """
    reports, maxima, fields = [], [], {}
    for R in R_ladder:
        grid = make_grid(dom, h, R)
        X = grid.points
        g = np.where(grid.kind == ARTIFICIAL, u_exact.value(X), 0.0)
        fld, rep = solve_dirichlet(op, grid, 0.0, g, method=method)
        reports.append(rep)
        maxima.append(rep.interior_max)
        fields[f"violation_R{R:g}"] = fld
    growing = all(b > a for a, b in zip(maxima, maxima[1:])) and maxima[0] > 0
    return MPVerdict(
        "violation study",
        growing,
        f"interior max per R {dict(zip(R_ladder, np.round(maxima, 9).tolist()))}: "
        + ("positive and growing (MP failure reproduced)" if growing else "not reproduced"),
        reports,
        {"R_ladder": list(R_ladder), "interior_max": maxima},
        fields,
    )


def uniformly_elliptic_on(op, points, tol: float = 1e-12) -> tuple[bool, float]:
    if isinstance(op, Linear):
        A = op.A_field(points)
        lam = float(np.min(np.linalg.eigvalsh(A)))
    elif isinstance(op, SupInf):
        lam = min(float(np.linalg.eigvalsh(np.asarray(t.A))[0]) for t in op.terms())
    else:
        raise MPLabError("uniform ellipticity check needs a Linear or SupInf operator")
    return lam > tol, lam


def lattice_mp_scenario(lattice: LatticeSpec, op, h: float = 0.05, R: float = 3.0, g_ends: float = -1.0, tol: float = 1e-12) -> MPVerdict:
    """Crossing-strips experiment: ``g = g_ends`` on the truncation ends, 0 on the strip sides.

    Checks the discrete MP and that each half-strip's maximum sits on the
    closure of the node region boundary (within one grid cell).
    """
    if lattice.n != 2 or len(lattice.cylinders) != 2:
        raise MPLabError("the lattice scenario is implemented for two crossing strips in the plane")
    widths = [float(c.widths[0]) for c in lattice.cylinders]
    offsets = [float(c.offsets[0]) for c in lattice.cylinders]
    # node region: product of the two slabs (axis of each strip's bounded direction)
    bounds = {}
    for c in lattice.cylinders:
        axis = int(np.argmax(np.abs(c.bounded_dirs[0])))
        bounds[axis] = (float(c.offsets[0]), float(c.offsets[0] + c.widths[0]))
    if set(bounds) != {0, 1}:
        raise MPLabError("strips must be bounded in different axes")
    lo = np.array([bounds[0][0] - R, bounds[1][0] - R])
    hi = np.array([bounds[0][1] + R, bounds[1][1] + R])
    grid = make_grid(lattice, h, box=(lo, hi))
    X = grid.points
    node_pts = X[in_node_region(lattice, X) & (grid.kind != OUTSIDE)]
    ok, lam = uniformly_elliptic_on(op, node_pts)
    if not ok:
        return MPVerdict(
            "lattice MP",
            None,
            f"OUT OF HYPOTHESES: operator not uniformly elliptic in the node region (min eigenvalue {lam:.3e})",
            [],
            {"node_min_eigenvalue": lam},
        )
    g = np.where(grid.kind == ARTIFICIAL, g_ends, 0.0)
    field_, rep = solve_dirichlet(op, grid, 0.0, g)
    u = field_.values
    (x0, x1), (y0, y1) = bounds[0], bounds[1]
    hx, hy = grid.spacing
    cell = float(np.linalg.norm(grid.spacing))
    live = grid.kind != OUTSIDE
    in_N = (X[:, 0] >= x0 - hx / 2) & (X[:, 0] <= x1 + hx / 2) & (X[:, 1] >= y0 - hy / 2) & (X[:, 1] <= y1 + hy / 2)
    dist = np.array([_dist_to_square_boundary(p, (x0, x1), (y0, y1)) for p in X])
    on_dN = in_N & (dist <= 0.5 * min(hx, hy)) & live
    max_dN = float(np.max(u[on_dN]))
    # closed half-strips (sides included, truncation ends excluded)
    halves = {
        "x1 > node": (X[:, 0] >= x1 - hx / 2) & (X[:, 1] >= y0 - hy / 2) & (X[:, 1] <= y1 + hy / 2),
        "x1 < node": (X[:, 0] <= x0 + hx / 2) & (X[:, 1] >= y0 - hy / 2) & (X[:, 1] <= y1 + hy / 2),
        "x2 > node": (X[:, 1] >= y1 - hy / 2) & (X[:, 0] >= x0 - hx / 2) & (X[:, 0] <= x1 + hx / 2),
        "x2 < node": (X[:, 1] <= y0 + hy / 2) & (X[:, 0] >= x0 - hx / 2) & (X[:, 0] <= x1 + hx / 2),
    }
    loc = {}
    all_near = True
    for name, mask in halves.items():
        sel = np.flatnonzero(mask & live & (grid.kind != ARTIFICIAL))
        top = float(np.max(u[sel]))
        ties = sel[u[sel] >= top - 1e-12]
        j = ties[int(np.argmin(dist[ties]))]
        near = bool(dist[j] <= cell + 1e-12 and top <= max_dN + tol)
        all_near &= near
        strict = np.flatnonzero(mask & (grid.kind == INTERIOR))
        k = strict[int(np.argmax(u[strict]))]
        loc[name] = {
            "max": top,
            "argmax_nearest_node_boundary": X[j].tolist(),
            "distance_to_node_boundary": float(dist[j]),
            "n_maximizers": int(len(ties)),
            "within_one_cell": near,
            "interior_argmax": X[k].tolist(),
            "interior_argmax_distance": float(dist[k]),
        }
    loc["node boundary"] = {"max": max_dN}
    mp_ok = rep.max_value <= rep.boundary_max + tol
    verdict = bool(mp_ok and all_near and rep.max_value <= max(0.0, g_ends) + tol)
    return MPVerdict(
        "lattice MP",
        verdict,
        f"max u = {rep.max_value:.3e}, boundary max {rep.boundary_max:.3e}; half-strip maxima on the node boundary: {all_near}",
        [rep],
        {"localization": loc, "cell": cell, "widths": widths, "offsets": offsets, "R": R},
        {"lattice": field_},
    )


def _dist_to_square_boundary(p, xs, ys) -> float:
    x, y = float(p[0]), float(p[1])
    dx = max(xs[0] - x, 0.0, x - xs[1])
    dy = max(ys[0] - y, 0.0, y - ys[1])
    if dx > 0 or dy > 0:
        return math.hypot(dx, dy)
    return min(x - xs[0], xs[1] - x, y - ys[0], ys[1] - y)
