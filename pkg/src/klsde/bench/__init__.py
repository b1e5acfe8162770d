"""Benchmark harness: problem builders, experiment configs, CSV-producing runs."""
from .config import METHODS, ExperimentConfig, load_config
from .problems import (BenchProblem, build_heat_spde, build_problem, build_scalar_ou,
                       build_turbulent_diffusion)
from .runs import (ConvergenceRow, reference_second_moment, run_convergence, run_endpoint_gallery,
                   run_moments, run_sample, run_trajectory)

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "load_config",
    "BenchProblem",
    "build_heat_spde",
    "build_problem",
    "build_scalar_ou",
    "build_turbulent_diffusion",
    "ConvergenceRow",
    "reference_second_moment",
    "run_convergence",
    "run_endpoint_gallery",
    "run_moments",
    "run_sample",
    "run_trajectory",
]
