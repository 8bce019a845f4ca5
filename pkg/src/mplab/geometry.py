"""Cylindrical and lattice domains.

A cylinder is bounded in ``k`` orthonormal directions (slab inequalities
``a_h <= x . nu_h <= a_h + d_h``) and unbounded in the ``n - k`` directions
spanning the orthogonal complement.  Lattices are finite unions of
cylinders with a single unbounded direction each.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadWidth, DimensionMismatch, NonCylinder, NonOrthonormalFrame

FRAME_TOL = 1e-12
GS_CORRECTION_TOL = 1e-8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _gram_schmidt(vectors: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt, applied twice for stability."""
    q = np.array(vectors, dtype=float)
    for _ in range(2):
        for i in range(q.shape[0]):
            for j in range(i):
                q[i] -= (q[i] @ q[j]) * q[j]
            norm = np.linalg.norm(q[i])
            if norm == 0.0:
                raise NonOrthonormalFrame(f"direction {i} is linearly dependent")
            q[i] /= norm
    return q


def _complement_basis(dirs: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of span(dirs).

    Built from the canonical axes so that axis-aligned cylinders get
    axis-aligned unbounded directions (with positive orientation).
    """
    basis = [d for d in dirs]
    out = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        v = e.copy()
        for _ in range(2):
            for b in basis + out:
                v -= (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            out.append(v / norm)
        if len(out) == n - len(dirs):
            break
    return np.array(out).reshape(n - len(dirs), n)


@dataclass(frozen=True)
class ProjectionPair:
    P: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True, eq=False)
class CylinderSpec:
    """Validated (n-k)-infinite cylinder; construct with :func:`make_cylinder`."""

    ambient_dim: int
    bounded_dirs: np.ndarray  # (k, n), orthonormal rows
    offsets: np.ndarray  # (k,)
    widths: np.ndarray  # (k,)
    unbounded_dirs: np.ndarray = field(repr=False)  # (n-k, n)

    @property
    def k(self) -> int:
        return self.bounded_dirs.shape[0]

    @property
    def n(self) -> int:
        return self.ambient_dim

    @property
    def frame(self) -> np.ndarray:
        """(n, n) orthogonal matrix; rows are bounded then unbounded directions."""
        return np.vstack([self.bounded_dirs, self.unbounded_dirs])

    def slab_coords(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.bounded_dirs.T

    def to_dict(self) -> dict:
        return {
            "dim": int(self.ambient_dim),
            "dirs": self.bounded_dirs.tolist(),
            "offsets": self.offsets.tolist(),
            "widths": self.widths.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CylinderSpec":
        return make_cylinder(d["dim"], d["dirs"], d.get("offsets"), d["widths"])

    def __eq__(self, other):
        if not isinstance(other, CylinderSpec):
            return NotImplemented
        return (
            self.ambient_dim == other.ambient_dim
            and np.array_equal(self.bounded_dirs, other.bounded_dirs)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.widths, other.widths)
        )

    __hash__ = None


def make_cylinder(n, dirs, offsets=None, widths=None) -> CylinderSpec:
    """Build a cylinder ``{a_h <= x . nu_h <= a_h + d_h, h = 1..k}`` in R^n.

    Directions that are orthonormal up to 1e-8 are re-orthonormalized;
    anything worse is rejected.  ``offsets`` defaults to zeros.
    """
    n = int(n)
    if n < 2:
        raise NonCylinder(f"ambient dimension must be >= 2, got {n}")
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    k = dirs.shape[0]
    if dirs.shape[1] != n:
        raise DimensionMismatch(f"directions must have length {n}, got {dirs.shape[1]}")
    if not 1 <= k <= n - 1:
        raise NonCylinder(f"need 1 <= k <= n-1 bounded directions, got k={k}, n={n}")
    if widths is None:
        raise BadWidth("widths are required")
    widths = np.asarray(widths, dtype=float).reshape(-1)
    offsets = np.zeros(k) if offsets is None else np.asarray(offsets, dtype=float).reshape(-1)
    if widths.shape != (k,) or offsets.shape != (k,):
        raise DimensionMismatch("offsets and widths need one entry per bounded direction")
    if not np.all(np.isfinite(widths)) or np.any(widths <= 0):
        raise BadWidth(f"widths must be finite and > 0, got {widths.tolist()}")
    if not np.all(np.isfinite(offsets)):
        raise BadWidth("offsets must be finite")

    q = _gram_schmidt(dirs)
    correction = float(np.max(np.abs(q - dirs)))
    if correction > GS_CORRECTION_TOL:
        raise NonOrthonormalFrame(
            f"frame is not orthonormal (Gram-Schmidt correction {correction:.3e} > {GS_CORRECTION_TOL})"
        )
    return CylinderSpec(
        ambient_dim=n,
        bounded_dirs=_frozen(q),
        offsets=_frozen(offsets),
        widths=_frozen(widths),
        unbounded_dirs=_frozen(_complement_basis(q, n)),
    )


def projections(c: CylinderSpec) -> ProjectionPair:
    P = c.bounded_dirs.T @ c.bounded_dirs
    P = 0.5 * (P + P.T)
    Q = np.eye(c.ambient_dim) - P
    return ProjectionPair(P=_frozen(P), Q=_frozen(Q))


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """Finite union of 1-infinite cylinders (each with k = n - 1)."""

    cylinders: tuple

    def __post_init__(self):
        if len(self.cylinders) == 0:
            raise NonCylinder("a lattice needs at least one cylinder")
        n = self.cylinders[0].ambient_dim
        for c in self.cylinders:
            if c.ambient_dim != n:
                raise DimensionMismatch("all lattice cylinders must share the ambient dimension")
            if c.k != n - 1:
                raise NonCylinder("lattice members must have exactly one unbounded direction")

    @property
    def ambient_dim(self) -> int:
        return self.cylinders[0].ambient_dim

    n = ambient_dim

    def to_dict(self) -> dict:
        return {"cylinders": [c.to_dict() for c in self.cylinders]}

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeSpec":
        return cls(tuple(CylinderSpec.from_dict(c) for c in d["cylinders"]))


def make_lattice(cylinders) -> LatticeSpec:
    return LatticeSpec(tuple(cylinders))


def _check_points(dom, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[-1] != dom.ambient_dim:
        raise DimensionMismatch(f"point has length {x2.shape[-1]}, domain lives in R^{dom.ambient_dim}")
    return x2, single


def _cyl_mask(c: CylinderSpec, x: np.ndarray, strict: bool) -> np.ndarray:
    s = x @ c.bounded_dirs.T
    lo, hi = c.offsets, c.offsets + c.widths
    if strict:
        inside = (s > lo) & (s < hi)
    else:
        inside = (s >= lo) & (s <= hi)
    return np.all(inside, axis=1)


def multiplicity(dom, x):
    """Number of member cylinders containing ``x`` (closed slabs)."""
    x2, single = _check_points(dom, x)
    cyls = dom.cylinders if isinstance(dom, LatticeSpec) else (dom,)
    m = sum(_cyl_mask(c, x2, strict=False).astype(int) for c in cyls)
    return int(m[0]) if single else m


def contains(dom, x):
    """Closed-slab membership; vectorized over rows of ``x``."""
    m = multiplicity(dom, x)
    return bool(m >= 1) if np.ndim(m) == 0 else m >= 1


def strictly_contains(dom, x):
    """Open-slab membership (interior points only)."""
    x2, single = _check_points(dom, x)
    cyls = dom.cylinders if isinstance(dom, LatticeSpec) else (dom,)
    mask = np.zeros(len(x2), dtype=bool)
    for c in cyls:
        mask |= _cyl_mask(c, x2, strict=True)
    return bool(mask[0]) if single else mask


def in_node_region(lattice: LatticeSpec, x):
    """True where two or more lattice cylinders overlap."""
    m = multiplicity(lattice, x)
    return bool(m >= 2) if np.ndim(m) == 0 else m >= 2


def crossing_strips(width: float = 1.0) -> LatticeSpec:
    """Two perpendicular strips R x (0, w) and (0, w) x R in the plane."""
    horizontal = make_cylinder(2, [[0.0, 1.0]], [0.0], [width])
    vertical = make_cylinder(2, [[1.0, 0.0]], [0.0], [width])
    return make_lattice([horizontal, vertical])


def domain_from_dict(d: dict):
    if "cylinders" in d:
        return LatticeSpec.from_dict(d)
    return CylinderSpec.from_dict(d)
