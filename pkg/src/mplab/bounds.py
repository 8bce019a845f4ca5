"""Theorem-level reports: weak MP, sup bound, narrow-domain MP, growth tradeoff.

Each report ties constants from the structure check to the barrier
parameters, the sampled certificates and a finite-difference cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barriers import abp_bound, narrow_threshold, pl_barrier, pl_inequality, pl_invert, pl_solve, pl_truncation_constant
from .errors import BadParams, HypothesisNotMet, MPLabError
from .functions import analytic, combine
from .geometry import CylinderSpec, LatticeSpec, projections
from .operators import Linear, SupInf
from .solver import _field_values, empirical_mp_check, lattice_mp_scenario, make_grid, solve_dirichlet, violation_study
from .structure import LABEL, check_structure, make_plan
from .verify import (
    COUNTEREXAMPLES,
    PL_TOL,
    SampleSet,
    abp_composite,
    certify_inequality,
    counterexample_report,
    global_Lambda1,
    interior_samples,
    residuals,
    slab_parabola,
    sponge_limit_check,
)

THEOREMS = ("MP", "ABP", "NARROW", "PL", "LATTICE")


@dataclass
class TheoremReport:
    theorem: str
    operator: str
    verdict: bool | None
    status: str
    hypotheses_ok: bool
    failed_flags: list
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    certificates: list = field(default_factory=list)
    empirical: dict = field(default_factory=dict)
    structure: dict = field(default_factory=dict)
    counterexample: dict | None = None
    label: str = LABEL
    fields: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out.pop("fields")
        return out

    def to_text(self) -> str:
        head = {True: "PASS", False: "FAIL", None: "NO VERDICT"}[self.verdict]
        lines = [f"== {self.theorem} [{head}] operator {self.operator}", f"   {self.status}"]
        if self.failed_flags:
            lines.append(f"   hypotheses not met: {', '.join(self.failed_flags)}")
        for k, v in self.inputs.items():
            lines.append(f"   input  {k} = {_show(v)}")
        for k, v in self.outputs.items():
            lines.append(f"   output {k} = {_show(v)}")
        for c in self.certificates:
            lines.append("   cert   " + _cert_line(c))
        for k, v in self.empirical.items():
            lines.append(f"   solver {k} = {_show(v)}")
        if self.counterexample:
            lines.append(f"   counterexample {self.counterexample['name']}: {self.counterexample['conclusion']}")
            for c in self.counterexample["certificates"]:
                lines.append("   cert   " + _cert_line(c))
        lines.append(f"   ({self.label})")
        return "\n".join(lines)


def _show(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, (list, tuple)) and v and isinstance(v[0], float):
        return "[" + ", ".join(f"{x:.9g}" for x in v) + "]"
    return str(v)


def _cert_line(c: dict) -> str:
    mark = "PASS" if c["verdict"] else "FAIL"
    return (
        f"[{mark}] {c['claim']}: worst margin {c['worst_margin'] + 0.0:.6e} "
        f"({c['n_samples']} samples, seed {c['seed']}, tol {c['tolerance']:g})"
    )


# ------------------------------------------------------------------ helpers


def _lambda_along(op, nu, X) -> np.ndarray:
    if isinstance(op, Linear):
        A = op.A_field(X)
        return np.einsum("i,mij,j->m", nu, A, nu)
    if isinstance(op, SupInf):
        return np.full(len(X), min(float(nu @ np.asarray(t.A) @ nu) for t in op.terms()))
    raise MPLabError("the sup bound needs a Linear or SupInf operator")


def _base(theorem, op, report, **kw) -> TheoremReport:
    failed = report.failed_flags() if report is not None else []
    return TheoremReport(
        theorem=theorem,
        operator=getattr(op, "name", type(op).__name__),
        verdict=None,
        status="",
        hypotheses_ok=not failed,
        failed_flags=list(failed),
        structure=report.to_dict() if report is not None else {},
        **kw,
    )


def _hypothesis_gate(rep: TheoremReport, strict: bool, counterexample: str | None, opts: dict):
    """Mark a report as out of hypotheses; run the counterexample bundle if one is known."""
    if rep.hypotheses_ok:
        return False
    if strict:
        raise HypothesisNotMet(rep.failed_flags[0])
    rep.verdict = False
    rep.status = f"HYPOTHESIS NOT MET: {', '.join(rep.failed_flags)}"
    if counterexample:
        rep.counterexample = counterexample_report(counterexample, seed=opts.get("seed", 0)).to_dict()
    return True


# --------------------------------------------------------------- theorems


def _run_mp(op, dom, report, opts):
    rep = _base("MP", op, report)
    cx = opts.get("counterexample")
    if _hypothesis_gate(rep, opts.get("strict", False), cx, opts):
        return rep
    seed = opts.get("seed", 0)
    sponge = sponge_limit_check(op, dom, Lambda1=global_Lambda1(report), seed=seed)
    rep.certificates.append(sponge.to_dict())
    rep.inputs.update({"Lambda1": global_Lambda1(report), "direction": report.ellipticity_index, "Gamma": report.Gamma})
    if cx:
        bundle = counterexample_report(cx, seed=seed)
        rep.counterexample = bundle.to_dict()
        rep.hypotheses_ok = False
        rep.failed_flags.append(bundle.violated)
        rep.verdict = False
        rep.status = f"MP fails for {bundle.function}: {bundle.violated}"
        grid = opts.get("grid", {})
        if grid.get("violation_study", True) and isinstance(op, Linear):
            study = violation_study(
                op, dom, analytic(COUNTEREXAMPLES[cx]["function"]), h=grid.get("h", math.pi / 16), R_ladder=tuple(grid.get("R_ladder", (2.0, 4.0, 6.0)))
            )
            rep.empirical["violation_study"] = study.status
            rep.empirical["interior_max_by_R"] = study.details["interior_max"]
            rep.fields.update(study.fields)
        return rep
    grid = opts.get("grid", {})
    check = empirical_mp_check(
        op,
        dom,
        h=grid.get("h", 0.1),
        R=grid.get("R", 5.0),
        f_variants=tuple(opts.get("f_variants", (0.0, 1.0))),
        g=opts.get("g", 0.0),
        tol=opts.get("tolerance", 1e-10),
    )
    rep.empirical = {"status": check.status, "max_u": max(r.max_value for r in check.reports)}
    rep.fields.update(check.fields)
    rep.verdict = bool(sponge.verdict and check.verdict)
    rep.status = "weak MP: sponge limit certified and discrete MP observed" if rep.verdict else "weak MP check failed"
    return rep


def _sup_f_over_lambda(op, dom, nu, f, n_samples, seed, ranges):
    S = interior_samples(dom, n_samples, seed, ranges)
    fv = _field_values(f, S.points)
    lam = _lambda_along(op, nu, S.points)
    ratio = np.maximum(-fv, 0.0) / lam
    return float(np.max(ratio)), S


def _run_abp(op, dom, report, opts):
    rep = _base("ABP", op, report)
    if _hypothesis_gate(rep, opts.get("strict", False), opts.get("counterexample"), opts):
        return rep
    if not isinstance(dom, CylinderSpec):
        raise MPLabError("the sup bound runs on a single cylinder")
    h_idx = report.ellipticity_index if opts.get("direction") is None else int(opts["direction"])
    nu = dom.bounded_dirs[h_idx]
    d = float(dom.widths[h_idx])
    f = opts.get("f", -1.0)
    g = opts.get("g", 0.0)
    grid_opts = opts.get("grid", {})
    ranges = grid_opts.get("ranges")
    seed = opts.get("seed", 0)
    Gamma = report.Gamma
    sfl, _ = _sup_f_over_lambda(op, dom, nu, f, opts.get("n_samples", 1024), seed, ranges)
    grid = make_grid(dom, grid_opts.get("h", 1.0 / 32), R=grid_opts.get("R", 1.0), ranges=ranges)
    X = grid.points
    bd = grid.boundary
    sup_bdry = float(np.max(np.maximum(_field_values(g, X[bd]), 0.0))) if bd.size else 0.0
    bound = abp_bound(d, Gamma, sfl, sup_bdry)
    rep.inputs.update({"d_h": d, "direction": h_idx, "Gamma": Gamma, "sup_f_minus_over_lambda": sfl, "sup_boundary_u_plus": sup_bdry})
    rep.outputs.update({"factor": math.exp(1 + d * Gamma) / (1 + d * Gamma), "bound": bound})

    # proof mirror: rescaled auxiliary composite with an analytic witness u >= 0
    u = slab_parabola(dom, h_idx)
    Su = interior_samples(dom, opts.get("n_samples", 1024), seed, ranges)
    f_u = residuals(op, u, Su.points, 0.0)
    lam = _lambda_along(op, nu, Su.points)
    sfl_u = float(np.max(np.maximum(-f_u, 0.0) / lam))
    comp = abp_composite(op, dom, u, Gamma, sfl_u, 0.0, h=h_idx, n_samples=opts.get("n_samples", 1024), seed=seed, ranges=ranges)
    rep.certificates += [comp.interior.to_dict(), comp.boundary.to_dict()]
    rep.outputs["witness_bound"] = comp.bound
    rep.outputs["witness_max"] = float(np.max(u.value(Su.points)))

    sol, solve = solve_dirichlet(op, grid, f, g)
    rep.fields["solution"] = sol
    rep.empirical = {"max_u": solve.max_value, "argmax": solve.argmax, "h": solve.h, "residual": solve.residual}
    ok_solver = solve.max_value <= bound
    ok_cert = comp.interior.verdict and comp.boundary.verdict and rep.outputs["witness_max"] <= comp.bound
    rep.verdict = bool(ok_solver and ok_cert)
    rep.status = f"sup u <= {bound:.12g}; solver max {solve.max_value:.6g}"
    return rep


def _run_narrow(op, dom, report, opts):
    rep = _base("NARROW", op, report)
    if _hypothesis_gate(rep, opts.get("strict", False), opts.get("counterexample"), opts):
        return rep
    Gamma = opts["Gamma"] if opts.get("Gamma") is not None else report.Gamma
    K = opts["K"] if opts.get("K") is not None else report.K
    if K is None or not K > 0:
        rep.verdict = True
        rep.status = "c <= 0 everywhere sampled: the plain weak MP applies (no width restriction)"
        rep.inputs.update({"Gamma": Gamma, "K": K})
        return rep
    d_star = narrow_threshold(Gamma, K)
    idx = report.ellipticity_index if report.ellipticity_index is not None else 0
    d = float(dom.widths[idx]) if isinstance(dom, CylinderSpec) else math.nan
    rep.inputs.update({"Gamma": Gamma, "K": K, "d_h": d})
    rep.outputs.update({"threshold": d_star, "margin": d_star - d})
    inside = d < d_star
    if opts.get("solve", True) and isinstance(op, (Linear, SupInf)) and isinstance(dom, CylinderSpec):
        grid = opts.get("grid", {})
        check = empirical_mp_check(
            op, dom, h=grid.get("h", d / 32), R=grid.get("R", 2.0 * d), f_variants=(0.0,), g=opts.get("g", -1.0)
        )
        rep.empirical = {"status": check.status, "max_u": check.reports[0].max_value}
        rep.fields["solution"] = check.fields["mp_rhs0"]
        rep.verdict = bool(inside and check.verdict)
    else:
        rep.verdict = bool(inside)
    rep.status = f"threshold d* = {d_star:.12g}; width {d:.6g} {'<' if inside else '>='} d*"
    return rep


def _run_pl(op, dom, report, opts):
    rep = _base("PL", op, report)
    if not report.rho_finite and "rho_bound" not in report.failed_flags():
        rep.failed_flags.append("rho_bound")
        rep.hypotheses_ok = False
    if _hypothesis_gate(rep, opts.get("strict", False), opts.get("counterexample"), opts):
        return rep
    rho = float(opts.get("rho") or report.rho)
    Gamma = float(opts["Gamma"]) if opts.get("Gamma") is not None else report.Gamma
    rep.inputs.update({"rho": rho, "Gamma": Gamma})
    if opts.get("d0") is not None:
        d0 = float(opts["d0"])
        beta = pl_invert(d0, rho, Gamma)
        back = pl_solve(beta, rho, Gamma, beta=beta)
        rep.inputs["d0"] = d0
        rep.outputs.update({"beta": beta, "alpha": back.alpha, "width": back.d_width, "round_trip_width": back.d_width})
        rep.verdict = back.d_width >= d0 * (1 - 1e-9)
        rep.status = f"growth rate beta = {beta:.12g} admissible for width {d0:g}"
        return rep
    beta0 = float(opts.get("beta0", 1.0))
    params = pl_solve(beta0, rho, Gamma, beta=opts.get("beta"))
    rep.inputs["beta0"] = beta0
    rep.outputs.update(
        {
            "alpha": params.alpha,
            "alpha_root": params.alpha_root,
            "beta": params.beta,
            "d0": params.d_width,
            "inequality_value": params.margin,
            "width_margin": params.width_margin,
            "note": "d0 is a sampled-certified lower bound for the existential width constant",
        }
    )
    verdict = params.margin <= PL_TOL and params.width_margin >= 0
    if isinstance(dom, CylinderSpec) and isinstance(op, (Linear, SupInf)):
        h = report.ellipticity_index
        nu = dom.bounded_dirs[h]
        centre = float(dom.offsets[h] + 0.5 * dom.widths[h])
        v = pl_barrier(params, nu, projections(dom).Q, band_centre_at=centre)
        width = min(params.d_width, float(dom.widths[h]))
        band = _band_samples(dom, h, centre, width, opts.get("n_samples", 1024), opts.get("seed", 0))
        cert = certify_inequality(
            op, combine([(-1.0, v)], name="-v", n=dom.n), dom, band, ">=", 0.0, PL_TOL, claim="F[-v] >= 0 on the band", zero_order=True
        )
        rep.certificates.append(cert.to_dict())
        sup_R = float(opts.get("sup_boundary_uplus_R", 1.0))
        R = float(opts.get("R", 10.0))
        rep.outputs["c_R"] = pl_truncation_constant(sup_R, params.beta, R, params.alpha, width)
        verdict = verdict and cert.verdict
        rep.outputs["domain_width"] = float(dom.widths[h])
        rep.outputs["width_covers_domain"] = bool(dom.widths[h] <= params.d_width)
    rep.verdict = bool(verdict)
    rep.status = f"(alpha, beta, d0) = ({params.alpha:.9g}, {params.beta:.9g}, {params.d_width:.9g}); inequality {pl_inequality(params.alpha, params.beta, rho, Gamma):.3e}"
    return rep


def _band_samples(dom: CylinderSpec, h: int, centre: float, width: float, m: int, seed: int) -> SampleSet:
    S = interior_samples(dom, m, seed, (-10.0, 10.0))
    nu = dom.bounded_dirs[h]
    t = S.points @ nu
    lo, hi = float(dom.offsets[h]), float(dom.offsets[h] + dom.widths[h])
    new_t = centre - 0.5 * width + (t - lo) / (hi - lo) * width
    pts = S.points + (new_t - t)[:, None] * nu[None]
    return SampleSet(pts, f"band of width {width:.6g} centred at x.nu = {centre:g}; " + S.description, seed)


def _run_lattice(op, dom, report, opts):
    rep = _base("LATTICE", op, None)
    if not isinstance(dom, LatticeSpec):
        raise MPLabError("the lattice scenario needs a lattice domain")
    grid = opts.get("grid", {})
    v = lattice_mp_scenario(dom, op, h=grid.get("h", 0.05), R=grid.get("R", 3.0), g_ends=opts.get("g_ends", -1.0))
    rep.verdict = v.verdict
    rep.status = v.status
    rep.fields.update(v.fields)
    rep.empirical = {"localization": v.details.get("localization", {}), "max_u": v.reports[0].max_value if v.reports else None}
    if v.verdict is None:
        rep.hypotheses_ok = False
        rep.failed_flags.append("uniform_ellipticity_in_node_region")
    return rep


RUNNERS = {"MP": _run_mp, "ABP": _run_abp, "NARROW": _run_narrow, "PL": _run_pl, "LATTICE": _run_lattice}


def run_theorem(theorem: str, op, dom, options: dict | None = None, report=None) -> TheoremReport:
    """Run one theorem pipeline: structure -> barriers -> certificates -> solver.

    ``options`` keys (all optional): ``seed``, ``tolerance``, ``strict``,
    ``counterexample``, ``grid`` (``h``, ``R``, ``ranges``), ``f``, ``g``,
    ``beta0``, ``beta``, ``d0``, ``Gamma``, ``K``, ``rho``, ``n_samples``,
    ``structure`` (keyword arguments for :func:`make_plan`).
    """
    theorem = theorem.upper()
    if theorem not in RUNNERS:
        raise BadParams(f"unknown theorem {theorem!r}; choose from {', '.join(THEOREMS)}")
    opts = dict(options or {})
    if theorem != "LATTICE" and report is None:
        plan = make_plan(dom, seed=opts.get("seed", 0), **opts.get("structure", {}))
        report = check_structure(
            op, dom, plan, tol=opts.get("tolerance", 1e-10), narrow=theorem == "NARROW", threads=opts.get("threads")
        )
    return RUNNERS[theorem](op, dom, report, opts)
