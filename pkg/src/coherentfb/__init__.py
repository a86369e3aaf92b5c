"""Linear quantum systems with direct and indirect coupling: analysis and coherent feedback synthesis."""

__version__ = "0.1.0"

from .algebra import delta, flat, from_quadrature, quadrature_basis, symplectic, to_quadrature
from .analysis import (StabilityClass, classify_stability, decay_bound, dissipation_feasible,
                       hinf_norm, lqg_cost, lyapunov_solve, passivity_check, strict_brl)
from .errors import InfeasibleError, NotHurwitzError, RealizabilityError, SolverError
from .interconnect import ClosedLoop, close_loop, direct_couple, series
from .model import Controller, FieldChannel, GeneralModel, PlantModel, build
from .realizability import check_annihilation, check_controller, check_plant, complete_controller

__all__ = [
    "delta", "flat", "from_quadrature", "quadrature_basis", "symplectic", "to_quadrature",
    "StabilityClass", "classify_stability", "decay_bound", "dissipation_feasible", "hinf_norm",
    "lqg_cost", "lyapunov_solve", "passivity_check", "strict_brl",
    "InfeasibleError", "NotHurwitzError", "RealizabilityError", "SolverError",
    "ClosedLoop", "close_loop", "direct_couple", "series",
    "Controller", "FieldChannel", "GeneralModel", "PlantModel", "build",
    "check_annihilation", "check_controller", "check_plant", "complete_controller",
]
