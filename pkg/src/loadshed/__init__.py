"""Worst-case line-outage load shedding on lossless AC networks."""

from .caseio import BUNDLED, CaseFormatError, RawCase, build_network, load_case
from .netmodel import DecisionState, PowerNetwork, is_feasible, load_shed_mw
from .objective import eval_H, grad_gamma, grad_theta, grad_z, lipschitz
from .palm import SolverConfig, SolveReport, palm_step, solve
from .projections import project_gamma, project_theta, project_z

__all__ = [
    "BUNDLED", "CaseFormatError", "RawCase", "build_network", "load_case",
    "DecisionState", "PowerNetwork", "is_feasible", "load_shed_mw",
    "eval_H", "grad_gamma", "grad_theta", "grad_z", "lipschitz",
    "SolverConfig", "SolveReport", "palm_step", "solve",
    "project_gamma", "project_theta", "project_z",
]
__version__ = "0.1.0"
