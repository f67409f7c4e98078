"""Crystalline curvature flow with forcing: facet speeds, 1D facet dynamics and level-set evolution."""

__version__ = "0.1.0"

from .anisotropy import (Anisotropy, OneHomogeneous, SmoothQuadratic, cahn_hoffman_wulff, eval_polar, eval_sigma,
                         regularize, shrinking_radius, slice_anisotropy, subdifferential_face)
from .config import ConfigError, RunConfig, load_config, parse_config
from .facet1d import (FacetProblem1D, evolve_facet_ode, explicit_solution, nonexistence_certificate, solve_ell,
                      solve_facet, taut_string)
from .fields import Forcing, ScalarField, centered_grid
from .levelset import (Mobility, cfl_dt, compare_evolutions, evolve, extract_level_set, holder_fit, lipschitz_monitor,
                       step, wulff_initial)
from .output import emit_plot_data
from .scenarios import run_scenario
from .tvprox import energy, minimal_divergence, project_wulff, resolvent

__all__ = [
    "Anisotropy", "OneHomogeneous", "SmoothQuadratic", "cahn_hoffman_wulff", "eval_polar", "eval_sigma",
    "regularize", "shrinking_radius", "slice_anisotropy", "subdifferential_face",
    "ConfigError", "RunConfig", "load_config", "parse_config",
    "FacetProblem1D", "evolve_facet_ode", "explicit_solution", "nonexistence_certificate", "solve_ell",
    "solve_facet", "taut_string", "Forcing", "ScalarField", "centered_grid",
    "Mobility", "cfl_dt", "compare_evolutions", "evolve", "extract_level_set", "holder_fit", "lipschitz_monitor",
    "step", "wulff_initial", "emit_plot_data", "run_scenario", "energy", "minimal_divergence", "project_wulff",
    "resolvent",
]
