"""Scenario files: YAML validated against a strict pydantic schema.

Unknown keys are rejected everywhere.  Validation errors carry the dotted
field path and, when the YAML parser can locate it, the source line.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, MPLabError
from .geometry import domain_from_dict
from .operators import operator_from_dict, preset

SCENARIO_FILE = "scenario.yaml"

Data = Union[float, str]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CylinderConfig(_Strict):
    dim: int = Field(ge=1)
    dirs: list[list[float]]
    offsets: Optional[list[float]] = None
    widths: list[float]


class LatticeConfig(_Strict):
    cylinders: list[CylinderConfig] = Field(min_length=1)


class LinearTermConfig(_Strict):
    A: list[list[Data]]
    b: Optional[list[Data]] = None
    c: Data = 0.0


class OperatorConfig(_Strict):
    preset: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)
    kind: Optional[Literal["linear", "supinf"]] = None
    name: Optional[str] = None
    dim: Optional[int] = None
    A: Optional[list[list[Data]]] = None
    b: Optional[list[Data]] = None
    c: Data = 0.0
    families: Optional[list[list[LinearTermConfig]]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.kind is None):
            raise ValueError("give exactly one of 'preset' or 'kind'")
        if self.kind == "linear" and (self.dim is None or self.A is None):
            raise ValueError("an inline linear operator needs 'dim' and 'A'")
        if self.kind == "supinf" and not self.families:
            raise ValueError("an inline sup-inf operator needs 'families'")
        return self


class GridConfig(_Strict):
    h: Optional[float] = Field(default=None, gt=0)
    R: Optional[float] = Field(default=None, gt=0)
    ranges: Optional[list[float]] = None
    R_ladder: Optional[list[float]] = None
    violation_study: bool = True


class StructureConfig(_Strict):
    n_interior: Optional[int] = Field(default=None, ge=1)
    n_far: Optional[int] = Field(default=None, ge=1)
    R_far: Optional[float] = Field(default=None, gt=0)


class TheoremConfig(_Strict):
    id: Literal["MP", "ABP", "NARROW", "PL", "LATTICE"]
    strict: bool = False
    counterexample: Optional[str] = None
    grid: GridConfig = Field(default_factory=GridConfig)
    structure: StructureConfig = Field(default_factory=StructureConfig)
    f: Optional[Data] = None
    g: Optional[Data] = None
    f_variants: Optional[list[Data]] = None
    g_ends: Optional[float] = None
    direction: Optional[int] = None
    solve: Optional[bool] = None
    n_samples: Optional[int] = Field(default=None, ge=1)
    beta0: Optional[float] = Field(default=None, gt=0)
    beta: Optional[float] = Field(default=None, gt=0)
    d0: Optional[float] = Field(default=None, gt=0)
    Gamma: Optional[float] = Field(default=None, ge=0)
    K: Optional[float] = None
    rho: Optional[float] = Field(default=None, gt=0)
    R: Optional[float] = Field(default=None, gt=0)
    sup_boundary_uplus_R: Optional[float] = Field(default=None, ge=0)


class ScenarioConfig(_Strict):
    name: str
    description: str = ""
    seed: int = 0
    tolerance: float = Field(default=1e-10, gt=0)
    threads: Optional[int] = Field(default=None, ge=1)
    operator: OperatorConfig
    domain: Optional[Union[CylinderConfig, LatticeConfig]] = None
    theorems: list[TheoremConfig] = Field(default_factory=list)
    counterexamples: list[str] = Field(default_factory=list)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _something_to_do(self):
        if not self.theorems and not self.counterexamples:
            raise ValueError("a scenario needs at least one theorem or counterexample")
        return self

    def build(self):
        """Return ``(operator, domain)``; the domain falls back to the preset's own."""
        o = self.operator
        dom = None
        try:
            if o.preset is not None:
                op, dom = preset(o.preset, **o.params)
            else:
                spec = o.model_dump(exclude_none=True, exclude={"preset", "params"})
                if o.kind == "supinf":
                    spec["families"] = [[t.model_dump() for t in fam] for fam in o.families]
                op = operator_from_dict(spec)
            if self.domain is not None:
                dom = domain_from_dict(self.domain.model_dump())
        except MPLabError as exc:
            raise ConfigError(str(exc), field="operator" if dom is None else "domain") from exc
        except TypeError as exc:
            raise ConfigError(str(exc), field="operator.params") from exc
        if dom is None:
            raise ConfigError("an inline operator needs a 'domain'", field="domain")
        return op, dom

    def theorem_options(self, t: TheoremConfig) -> dict:
        opts = t.model_dump(exclude_none=True, exclude={"id", "grid", "structure"})
        opts["grid"] = t.grid.model_dump(exclude_none=True)
        opts["structure"] = t.structure.model_dump(exclude_none=True)
        opts.update(seed=self.seed, tolerance=self.tolerance, threads=self.threads)
        return opts


def _line_index(node, path=(), out=None) -> dict:
    """Map key paths (as tuples) to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = path + (k.value,)
            out[key] = k.start_mark.line + 1
            _line_index(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            key = path + (i,)
            out[key] = v.start_mark.line + 1
            _line_index(v, key, out)
    return out


def _locate(loc: tuple, lines: dict):
    # pydantic inserts union/branch tags into loc; keep only keys present in the document
    path = tuple(p for p in loc if isinstance(p, int) or not str(p).startswith(("function-", "union[")))
    while path:
        if path in lines:
            return lines[path]
        path = path[:-1]
    return None


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"{source}: invalid YAML: {exc}", line=mark.line + 1 if mark else None) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping", line=1)
    lines = _line_index(root)
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        field = ".".join(str(p) for p in loc) or None
        raise ConfigError(f"{source}: {err['msg']}", field=field, line=_locate(loc, lines)) from exc


def resolve_path(path) -> Path:
    """A scenario is a YAML file or a directory holding ``scenario.yaml``."""
    p = Path(path)
    if p.is_dir():
        p = p / SCENARIO_FILE
    if not p.is_file():
        raise ConfigError(f"no scenario file at {p}")
    return p


def load_config(path) -> ScenarioConfig:
    p = resolve_path(path)
    return parse_config(p.read_text(), str(p))
