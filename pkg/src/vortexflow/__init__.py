"""Gradient flows of abelian vortex equations on a discretised torus."""
from .exceptions import *  # noqa: F401,F403
from .lattice import TorusGrid
from .fields import ActionSpec, ComplexGauge, Connection, Section, holomorphic_pair, theta_section
from .functionals import EnergyBreakdown, f_moment, grad_f, grad_ymh, ymh
from .flow import FlowConfig, FlowState, ConvergenceReport, run_flow
from .stability import classify_limit, weight
from .estimator import VortexFlow

__version__ = "0.1.0"

__all__ = [
    "TorusGrid", "ActionSpec", "ComplexGauge", "Connection", "Section", "holomorphic_pair",
    "theta_section", "EnergyBreakdown", "f_moment", "grad_f", "grad_ymh", "ymh", "FlowConfig",
    "FlowState", "ConvergenceReport", "run_flow", "classify_limit", "weight", "VortexFlow",
]
