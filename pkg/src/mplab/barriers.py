"""Explicit barrier families and the parameter inequalities that certify them.

Each family is a small immutable object with closed-form ``value``,
``gradient`` and ``hessian``; all three accept a single point or an
``(m, n)`` array of points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadParams, CosineDegenerate, NegativeInput, NoAdmissibleWidth, NonPositiveK
from .geometry import CylinderSpec, ProjectionPair

__all__ = [
    "Sponge",
    "ExpDir",
    "AbpAux",
    "PLBarrier",
    "PLParams",
    "WidthResult",
    "sponge_bounds",
    "abp_params",
    "abp_bound",
    "narrow_threshold",
    "pl_inequality",
    "pl_alpha_root",
    "pl_solve",
    "width_from_alpha",
    "pl_invert",
    "pl_truncation_constant",
    "exp_dir_barrier",
    "pl_barrier",
]


def _rows(x):
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


def _out(a, single):
    return a[0] if single else a


def bisect(pred, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 400) -> float:
    """Largest point where a monotone predicate holds: ``pred(lo)`` true, ``pred(hi)`` false."""
    for _ in range(max_iter):
        if hi - lo <= tol * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ------------------------------------------------------------------ families


@dataclass(frozen=True)
class Sponge:
    """``phi(x) = sqrt(|Q x|^2 + 1)``, Q the projection onto the unbounded directions."""

    Q: np.ndarray
    kind: str = field(default="sponge", init=False)

    @classmethod
    def for_domain(cls, pair: ProjectionPair) -> "Sponge":
        return cls(np.asarray(pair.Q, dtype=float))

    def value(self, x):
        X, single = _rows(x)
        z = X @ self.Q
        return _out(np.sqrt(np.sum(z * z, axis=1) + 1.0), single)

    def gradient(self, x):
        X, single = _rows(x)
        z = X @ self.Q
        phi = np.sqrt(np.sum(z * z, axis=1) + 1.0)
        return _out(z / phi[:, None], single)

    def hessian(self, x):
        X, single = _rows(x)
        z = X @ self.Q
        phi = np.sqrt(np.sum(z * z, axis=1) + 1.0)
        H = self.Q[None] / phi[:, None, None] - np.einsum("mi,mj->mij", z, z) / phi[:, None, None] ** 3
        return _out(H, single)

    def params(self) -> dict:
        return {"Q": self.Q.tolist()}


@dataclass(frozen=True)
class ExpDir:
    """``h(x) = M (1 + e^{-a d}) - M e^{a (x.nu - x0) - a d}``."""

    M: float
    alpha: float
    d: float
    x0: float
    nu: np.ndarray
    kind: str = field(default="exp_dir", init=False)

    def _e(self, X):
        return np.exp(self.alpha * (X @ self.nu - self.x0) - self.alpha * self.d)

    def value(self, x):
        X, single = _rows(x)
        return _out(self.M * (1.0 + math.exp(-self.alpha * self.d)) - self.M * self._e(X), single)

    def gradient(self, x):
        X, single = _rows(x)
        return _out(-self.alpha * self.M * self._e(X)[:, None] * self.nu[None], single)

    def hessian(self, x):
        X, single = _rows(x)
        nn = np.outer(self.nu, self.nu)
        return _out(-(self.alpha**2) * self.M * self._e(X)[:, None, None] * nn[None], single)

    def slab_infimum(self, lo: float, hi: float) -> float:
        """Exact infimum over ``lo <= x.nu - x0 <= hi`` (value is decreasing in x.nu)."""
        return float(self.value(self.nu * (self.x0 + hi)))

    def params(self) -> dict:
        return {"M": self.M, "alpha": self.alpha, "d": self.d, "x0": self.x0, "nu": self.nu.tolist()}


@dataclass(frozen=True)
class AbpAux:
    """``C1 exp(alpha ((x.nu - offset) / width))`` used by the sup bound."""

    C1: float
    alpha: float
    nu: np.ndarray
    offset: float = 0.0
    width: float = 1.0
    kind: str = field(default="abp_aux", init=False)

    def _e(self, X):
        return self.C1 * np.exp(self.alpha * (X @ self.nu - self.offset) / self.width)

    def value(self, x):
        X, single = _rows(x)
        return _out(self._e(X), single)

    def gradient(self, x):
        X, single = _rows(x)
        return _out((self.alpha / self.width) * self._e(X)[:, None] * self.nu[None], single)

    def hessian(self, x):
        X, single = _rows(x)
        nn = np.outer(self.nu, self.nu)
        return _out((self.alpha / self.width) ** 2 * self._e(X)[:, None, None] * nn[None], single)

    def params(self) -> dict:
        return {"C1": self.C1, "alpha": self.alpha, "nu": self.nu.tolist(), "offset": self.offset, "width": self.width}


@dataclass(frozen=True)
class PLBarrier:
    """``v(x) = sin(alpha (x.nu - shift)) exp(beta phi(|Q x|))`` with ``phi(r) = sqrt(r^2 + 1)``."""

    alpha: float
    beta: float
    nu: np.ndarray
    Q: np.ndarray
    shift: float = 0.0
    kind: str = field(default="pl", init=False)

    def _parts(self, X):
        y = X @ self.nu - self.shift
        z = X @ self.Q
        phi = np.sqrt(np.sum(z * z, axis=1) + 1.0)
        return y, z, phi, np.exp(self.beta * phi)

    def value(self, x):
        X, single = _rows(x)
        y, _, _, E = self._parts(X)
        return _out(np.sin(self.alpha * y) * E, single)

    def gradient(self, x):
        X, single = _rows(x)
        y, z, phi, E = self._parts(X)
        a = self.alpha
        g = (a * np.cos(a * y) * E)[:, None] * self.nu[None] + (np.sin(a * y) * E * self.beta / phi)[:, None] * z
        return _out(g, single)

    def hessian(self, x):
        X, single = _rows(x)
        y, z, phi, E = self._parts(X)
        a, b = self.alpha, self.beta
        S, C = np.sin(a * y), np.cos(a * y)
        nn = np.outer(self.nu, self.nu)
        zz = np.einsum("mi,mj->mij", z, z)
        nz = np.einsum("i,mj->mij", self.nu, z)
        H = (
            (-(a**2) * S * E)[:, None, None] * nn[None]
            + (a * b * C * E / phi)[:, None, None] * (nz + np.swapaxes(nz, 1, 2))
            + (S * E)[:, None, None]
            * ((b**2 / phi**2 - b / phi**3)[:, None, None] * zz + (b / phi)[:, None, None] * self.Q[None])
        )
        return _out(H, single)

    def params(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "nu": self.nu.tolist(), "Q": self.Q.tolist(), "shift": self.shift}


def exp_dir_barrier(M_eps, alpha, d, xprime_eps, nu) -> ExpDir:
    if not (M_eps > 0 and alpha > 0 and d > 0):
        raise BadParams("exp_dir_barrier needs M_eps > 0, alpha > 0, d > 0")
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise BadParams("nu must be a unit vector")
    return ExpDir(float(M_eps), float(alpha), float(d), float(xprime_eps), nu)


def sponge_bounds(x, pair: ProjectionPair) -> tuple[float, float]:
    """``(|D phi(x)|, min eig(Q/phi - D^2 phi))``; the second must be >= -1e-10."""
    sp = Sponge.for_domain(pair)
    g = sp.gradient(x)
    gap = pair.Q / sp.value(x) - sp.hessian(x)
    return float(np.linalg.norm(g)), float(np.linalg.eigvalsh(0.5 * (gap + gap.T))[0])


# ---------------------------------------------------------------- sup bound


def abp_params(Gamma: float, sup_f_over_lambda: float) -> tuple[float, float]:
    """``alpha = 1 + Gamma`` and ``C1 = sup(f^-/lambda) / (1 + Gamma)``."""
    if Gamma < 0 or sup_f_over_lambda < 0:
        raise NegativeInput("Gamma and sup f^-/lambda must be >= 0")
    alpha = 1.0 + Gamma
    return alpha, sup_f_over_lambda / alpha


def abp_factor(d: float, Gamma: float) -> float:
    t = 1.0 + d * Gamma
    return math.exp(t) / t


def abp_bound(d_h: float, Gamma: float, sup_f_over_lambda: float, sup_boundary_uplus: float) -> float:
    """``sup u <= sup_bdry u+ + e^{1 + d Gamma} / (1 + d Gamma) * sup(f^-/lambda) * d^2``."""
    if not d_h > 0:
        raise NegativeInput("d_h must be > 0")
    if Gamma < 0 or sup_f_over_lambda < 0 or sup_boundary_uplus < 0:
        raise NegativeInput("Gamma, sup f^-/lambda and sup u+ on the boundary must be >= 0")
    return sup_boundary_uplus + abp_factor(d_h, Gamma) * sup_f_over_lambda * d_h**2


def narrow_threshold(Gamma: float, K: float) -> float:
    """Largest ``d`` with ``e^{1 + d Gamma} / (1 + d Gamma) d^2 K < 1``.

    The left side is increasing in ``d``; the root is bracketed by doubling
    and refined by bisection.  Returns ``inf`` when no bracket exists below
    1e150 (``K`` vanishingly small).
    """
    if not K > 0:
        raise NonPositiveK("K must be > 0")
    if Gamma < 0:
        raise NegativeInput("Gamma must be >= 0")

    def below(d):
        try:
            return abp_factor(d, Gamma) * d * d * K < 1.0
        except OverflowError:
            return False

    hi = 1.0
    while below(hi):
        hi *= 2.0
        if hi > 1e150:
            return math.inf
    lo = 0.0
    return bisect(below, lo, hi, tol=1e-15)


# ------------------------------------------------------- growth-rate tradeoff


def pl_inequality(alpha: float, beta: float, rho: float, Gamma: float) -> float:
    """Left side of ``-alpha^2/2 + 2 rho beta (beta + 1) + Gamma (alpha + beta) <= 0``."""
    return -0.5 * alpha**2 + 2.0 * rho * beta * (beta + 1.0) + Gamma * (alpha + beta)


def pl_alpha_root(beta: float, rho: float, Gamma: float) -> float:
    """Positive root in ``alpha`` of :func:`pl_inequality`."""
    return Gamma + math.sqrt(Gamma**2 + 4.0 * rho * beta * (beta + 1.0) + 2.0 * Gamma * beta)


@dataclass(frozen=True)
class WidthResult:
    d0: float
    margin: float
    n_xh: int
    n_r: int
    sine_cap: float  # the width allowed by sin >= 1/2 alone

    def to_dict(self) -> dict:
        return {"d0": self.d0, "margin": self.margin, "n_xh": self.n_xh, "n_r": self.n_r, "sine_cap": self.sine_cap}


@dataclass(frozen=True)
class PLParams:
    beta0: float
    beta: float
    alpha: float
    alpha_root: float
    d_width: float
    rho: float
    Gamma: float
    margin: float
    width_margin: float = float("nan")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


R_GRID = np.concatenate([[0.0], np.logspace(-3, 6, 400)])


def _band_block(alpha, beta, delta, r):
    """Largest eigenvalue of ``e^{-beta phi} D^2 v - (-alpha^2/2 P_h + 2 beta (beta+1) Q)``.

    ``delta`` is the offset of x_h from the band centre and ``r = |Q x|``;
    broadcasts over both.  Only the plane spanned by ``nu`` and ``Q x`` can
    be positive: the other unbounded directions give ``beta S/phi - 2 beta
    (beta + 1) < 0`` and the other bounded directions give exactly 0.
    """
    S = np.cos(alpha * delta)
    C = np.sin(alpha * delta)
    inf = np.isinf(r)
    rf = np.where(inf, 0.0, r)
    phi = np.sqrt(rf * rf + 1.0)
    ratio = np.where(inf, 1.0, rf / phi)
    inv3 = np.where(inf, 0.0, 1.0 / phi**3)
    m11 = alpha**2 * (0.5 - S)
    m12 = alpha * beta * C * ratio
    m22 = S * (beta**2 * ratio**2 + beta * inv3) - 2.0 * beta * (beta + 1.0)
    mean = 0.5 * (m11 + m22)
    rad = np.sqrt((0.5 * (m11 - m22)) ** 2 + m12**2)
    top = mean + rad
    other_q = S * beta * np.where(inf, 0.0, 1.0 / phi) - 2.0 * beta * (beta + 1.0)
    return np.maximum(top, other_q)


def width_from_alpha(alpha: float, beta: float, n_xh: int = 10_000, r_grid=None, dom: CylinderSpec | None = None) -> WidthResult:
    """Largest band width ``d0 < pi/alpha`` on which the PL Hessian bound holds.

    The bound ``e^{-beta phi} D^2 v <= -alpha^2/2 P_h + 2 beta (beta+1) Q`` is
    checked on ``n_xh`` offsets across the band and on ``r_grid`` (log-spaced
    up to 1e6 plus ``r = inf``).  ``d0`` is found by bisection; the returned
    margin is ``-max eigenvalue`` over the sweep (>= 0 when certified).
    """
    if not (alpha > 0 and beta > 0):
        raise BadParams("alpha and beta must be > 0")
    r = np.concatenate([R_GRID if r_grid is None else np.asarray(r_grid, dtype=float), [np.inf]])

    def worst(d, m, rr):
        delta = np.linspace(-0.5 * d, 0.5 * d, m)
        return float(np.max(_band_block(alpha, beta, delta[:, None], rr[None, :])))

    cap = 2.0 * math.pi / (3.0 * alpha)  # sin >= 1/2 on the band
    floor = 1e-9 * math.pi / alpha
    if worst(floor, n_xh, r) > 0:
        raise NoAdmissibleWidth(f"Hessian bound fails already at width {floor:.3e}")
    # coarse bisection, then certify on the full sweep and back off if needed
    coarse_r = np.concatenate([r[:: max(1, len(r) // 60)], [np.inf]])
    d0 = bisect(lambda d: worst(d, 257, coarse_r) <= 0.0, floor, cap, tol=1e-13)
    margin = -worst(d0, n_xh, r)
    step = 1e-12
    while margin < 0 and d0 > floor:
        d0 = max(floor, d0 * (1.0 - step))
        step *= 4.0
        margin = -worst(d0, n_xh, r)
    if margin < 0:
        raise NoAdmissibleWidth("no certified width found")
    return WidthResult(d0=d0, margin=margin, n_xh=n_xh, n_r=len(r), sine_cap=cap)


def pl_solve(beta0: float, rho: float, Gamma: float, beta: float | None = None, delta: float = 0.1, inflate: float = 1e-9, n_xh: int = 10_000) -> PLParams:
    """Choose ``beta > beta0``, the smallest admissible ``alpha`` and the band width.

    ``beta`` defaults to ``beta0 (1 + delta)``.  ``alpha`` is the positive
    root of the quadratic inflated by a relative ``inflate`` so that the
    inequality holds strictly; it is also kept above ``beta``.
    """
    if not (beta0 > 0 and rho > 0 and Gamma >= 0):
        raise BadParams("need beta0 > 0, rho > 0, Gamma >= 0")
    beta = beta0 * (1.0 + delta) if beta is None else float(beta)
    if beta <= 0:
        raise BadParams("beta must be > 0")
    root = pl_alpha_root(beta, rho, Gamma)
    alpha = max(root * (1.0 + inflate), beta * (1.0 + inflate))
    width = width_from_alpha(alpha, beta, n_xh=n_xh)
    return PLParams(
        beta0=float(beta0),
        beta=beta,
        alpha=alpha,
        alpha_root=root,
        d_width=width.d0,
        rho=float(rho),
        Gamma=float(Gamma),
        margin=pl_inequality(alpha, beta, rho, Gamma),
        width_margin=width.margin,
    )


def pl_invert(d0: float, rho: float, Gamma: float, tol: float = 1e-11, n_xh: int = 513, **kw) -> float:
    """Largest ``beta`` whose certified band width is still >= ``d0``.

    Each probe runs :func:`width_from_alpha` with a lighter ``n_xh`` sweep.
    """
    if not d0 > 0:
        raise BadParams("d0 must be > 0")

    def width(b):
        return pl_solve(b, rho, Gamma, beta=b, n_xh=n_xh, **kw).d_width

    lo, hi = 1e-6, 1.0
    if width(lo) < d0:
        raise NoAdmissibleWidth(f"no beta admits width {d0}")
    while width(hi) >= d0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            return math.inf
    return bisect(lambda b: width(b) >= d0, lo, hi, tol=tol)


def pl_truncation_constant(sup_boundary_uplus_R: float, beta: float, R: float, alpha: float, d: float) -> float:
    """``sup u+ on the truncation boundary / (e^{beta R} cos(alpha d / 2))``."""
    if R < 0:
        raise BadParams("R must be >= 0")
    cos = math.cos(0.5 * alpha * d)
    if cos <= 1e-9 or 0.5 * alpha * d >= 0.5 * math.pi:
        raise CosineDegenerate(f"cos(alpha d/2) = {cos:.3e} is too small")
    return sup_boundary_uplus_R / (math.exp(beta * R) * cos)


def pl_barrier(params: PLParams, nu, Q, band_centre_at: float = 0.0) -> PLBarrier:
    """Barrier whose band centre ``pi/(2 alpha)`` sits at ``x.nu = band_centre_at``."""
    shift = band_centre_at - math.pi / (2.0 * params.alpha)
    return PLBarrier(params.alpha, params.beta, np.asarray(nu, dtype=float), np.asarray(Q, dtype=float), shift)


def family_from_dict(d: dict):
    kind = d["kind"]
    p = {k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in d["params"].items()}
    return {"sponge": Sponge, "exp_dir": ExpDir, "abp_aux": AbpAux, "pl": PLBarrier}[kind](**p)


def family_to_dict(f) -> dict:
    return {"kind": f.kind, "params": f.params()}
