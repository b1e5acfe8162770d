"""Sampling linear SDEs with additive noise through truncated Karhunen--Loeve
expansions and trigonometric phi functions of the drift matrix."""
from .baselines import Scheme, SteppingPlan, bem_path, bem_second_moment, em_path, em_second_moment, step_paths
from .errors import (AssumptionError, BoundUnavailable, ConfigError, DimensionError, DomainError,
                     KlsdeError, NumericalError, SingularityError, StrategyUnavailable, ValidationError)
from .klprocess import BasisKind, GaussianDraw, KlBasis, draw_gaussians, kl_frequencies, kl_path, standard_normals
from .matkit import (expm, fov_distance, fov_estimate, log_norm, real_schur, sector_fit,
                     sectorial_resolvent_bound, solve_sylvester, SylvesterSolver)
from .moments import (MomentReport, exact_mean, exact_second_moment, lyapunov_second_moment, moment_report,
                      second_moment_normal, strong_error_bound, truncated_second_moment, weak_error_bound,
                      weak_error_exact)
from .montecarlo import McEstimate, mc_second_moment
from .phifn import PhiSpec, phi_cos_matrix, phi_cos_scalar, phi_norm_bound, phi_sin_matrix, phi_sin_scalar
from .sampler import (FourierForcing, SamplerPlan, SdeProblem, Strategy, prepare, sample, sample_batch,
                      sample_normal_fastpath, solve_augmented_exp, solve_fourier_ode, solve_sylvester_route)

__version__ = "0.1.0"
