"""``mp-lab``: run scenario files, write reports and CSV fields.

Exit codes: 0 when every requested verdict passes, 2 when a hypothesis
flag failed, 3 when hypotheses hold but a verdict fails, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import run_theorem
from .config import ScenarioConfig, load_config, resolve_path
from .errors import ConfigError, HypothesisNotMet, MPLabError
from .operators import list_presets
from .verify import counterexample_report

EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS, EXIT_FAIL = 0, 1, 2, 3

log = logging.getLogger("mplab")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    """Recursively replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _provenance(exc: BaseException) -> str:
    """Name of the innermost mplab module on the traceback."""
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        p = Path(frame.filename)
        if p.parent.name == "mplab":
            return p.stem
    return "mplab"


def _setup_log(out: Path) -> logging.Handler:
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def _bundle_text(b: dict) -> str:
    lines = [f"== counterexample {b['name']}: {b['function']}", f"   {b['conclusion']}"]
    if b.get("violated_hypothesis"):
        lines.append(f"   hypothesis not met: {b['violated_hypothesis']}")
    for c in b["certificates"]:
        mark = "PASS" if c["verdict"] else "FAIL"
        lines.append(f"   cert   [{mark}] {c['claim']}: worst margin {c['worst_margin'] + 0.0:.6e} ({c['n_samples']} samples, seed {c['seed']})")
    return "\n".join(lines)


def execute(cfg: ScenarioConfig, out: Path) -> tuple[int, dict, str]:
    """Run every theorem and bundle of ``cfg``; write outputs under ``out``."""
    op, dom = cfg.build()
    out.mkdir(parents=True, exist_ok=True)
    reports, bundles, csvs = [], [], []
    hypothesis_failed = verdict_failed = False
    for t in cfg.theorems:
        log.info("theorem %s on %s", t.id, getattr(op, "name", "operator"))
        try:
            rep = run_theorem(t.id, op, dom, cfg.theorem_options(t))
        except HypothesisNotMet as exc:
            log.info("strict mode stop: %s", exc.flag)
            reports.append({"theorem": t.id, "verdict": False, "status": str(exc), "failed_flags": [exc.flag]})
            hypothesis_failed = True
            continue
        d = rep.to_dict()
        reports.append(d)
        hypothesis_failed |= not rep.hypotheses_ok
        verdict_failed |= rep.verdict is False
        for name, fld in sorted(rep.fields.items()):
            path = out / f"{t.id.lower()}_{name}.csv"
            fld.to_csv(path)
            csvs.append(path.name)
        log.info("theorem %s verdict %s", t.id, rep.verdict)
    for name in cfg.counterexamples:
        log.info("counterexample bundle %s", name)
        b = counterexample_report(name, seed=cfg.seed).to_dict()
        bundles.append(b)
        hypothesis_failed |= bool(b.get("violated_hypothesis"))
        verdict_failed |= not all(c["verdict"] for c in b["certificates"])

    if hypothesis_failed:
        code = EXIT_HYPOTHESIS
    elif verdict_failed:
        code = EXIT_FAIL
    else:
        code = EXIT_OK
    doc = {
        "scenario": cfg.name,
        "description": cfg.description,
        "seed": cfg.seed,
        "tolerance": cfg.tolerance,
        "operator": getattr(op, "name", type(op).__name__),
        "domain": dom.to_dict(),
        "theorems": reports,
        "counterexamples": bundles,
        "csv": csvs,
        "exit_code": code,
        "mplab_version": __version__,
    }
    text = _render_text(cfg, doc, reports, bundles)
    (out / "report.json").write_text(json.dumps(_clean(doc), indent=2, sort_keys=True, default=_jsonable) + "\n")
    (out / "report.txt").write_text(text + "\n")
    return code, doc, text


def _render_text(cfg, doc, reports, bundles) -> str:
    from .bounds import TheoremReport

    lines = [
        f"scenario  {cfg.name}",
        f"operator  {doc['operator']}",
        f"seed      {cfg.seed}",
        f"tolerance {cfg.tolerance:g}",
        "",
    ]
    for r in reports:
        if "label" in r:
            lines.append(TheoremReport(**r).to_text())
        else:
            lines.append(f"== {r['theorem']} [FAIL] {r['status']}")
    for b in bundles:
        lines.append(_bundle_text(b))
    lines.append("")
    lines.append(f"exit code {doc['exit_code']}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    try:
        path = resolve_path(args.path)
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    update = {}
    if args.threads is not None:
        update["threads"] = args.threads
    if args.tolerance is not None:
        update["tolerance"] = args.tolerance
    if update:
        cfg = cfg.model_copy(update=update)
    if args.out is not None:
        out = Path(args.out)
    elif cfg.output is not None:
        out = path.parent / cfg.output
    else:
        out = path.parent / "out"
    out.mkdir(parents=True, exist_ok=True)
    handler = _setup_log(out)
    try:
        log.info("scenario %s from %s", cfg.name, path)
        code, _, text = execute(cfg, out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (MPLabError, ArithmeticError, ValueError) as exc:
        where = _provenance(exc)
        log.exception("error in %s", where)
        print(f"error [{where}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        log.removeHandler(handler)
        handler.close()
    print(text)
    print(f"reports written to {out}")
    return code


def cmd_list_presets(args) -> int:
    print(list_presets())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mp-lab", description="Maximum-principle certificates for degenerate elliptic operators on cylinders.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario (YAML file or directory with scenario.yaml)")
    r.add_argument("path")
    r.add_argument("--threads", type=int, default=None, help="worker threads for sampled checks")
    r.add_argument("--tolerance", type=float, default=None, help="override the certificate tolerance")
    r.add_argument("--out", default=None, help="output directory (default: <scenario dir>/out)")
    r.set_defaults(func=cmd_run)
    lp = sub.add_parser("list-presets", help="print the operator preset registry")
    lp.set_defaults(func=cmd_list_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
