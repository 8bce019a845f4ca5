"""Certificates and finite-difference checks for maximum principles of
degenerate elliptic operators on cylindrical domains."""

__version__ = "0.1.0"

from .barriers import (
    AbpAux,
    ExpDir,
    PLBarrier,
    Sponge,
    abp_bound,
    narrow_threshold,
    pl_alpha_root,
    pl_inequality,
    pl_invert,
    pl_solve,
    width_from_alpha,
)
from .bounds import TheoremReport, run_theorem
from .config import ScenarioConfig, load_config, parse_config
from .errors import *  # noqa: F401,F403
from .geometry import CylinderSpec, LatticeSpec, contains, crossing_strips, make_cylinder, make_lattice, projections
from .operators import CallableOp, Linear, SupInf, evaluate_batch, list_presets, preset
from .solver import discretize, empirical_mp_check, lattice_mp_scenario, make_grid, solve_dirichlet
from .structure import check_structure, make_plan
from .verify import certify_inequality, counterexample_report, rescale_operator, sponge_limit_check
