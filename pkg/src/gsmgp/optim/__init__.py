"""Weight and noise solvers for the GSM likelihood."""
from .admm import AdmmParams, AdmmState, admm_grad_S, admm_solve, alpha_sweep, augmented_lagrangian
from .gradproj import GradProjParams, gradproj_solve, projected_step
from .linesearch import ArmijoResult, armijo_step
from .mm import MmParams, gaussian_init, majorizer, mm_inner_solve, mm_solve
from .probe import ProbeResult, unboundedness_probe
from .problem import LmkProblem, SolverReport, count_nonzero_weights

__all__ = [
    "AdmmParams", "AdmmState", "admm_grad_S", "admm_solve", "alpha_sweep", "augmented_lagrangian",
    "GradProjParams", "gradproj_solve", "projected_step", "ArmijoResult", "armijo_step",
    "MmParams", "gaussian_init", "majorizer", "mm_inner_solve", "mm_solve",
    "ProbeResult", "unboundedness_probe", "LmkProblem", "SolverReport", "count_nonzero_weights",
]
