"""Random diffusions with divergence-free perturbations of a gradient drift.

Poisson environments, the mollified random field and the drift family
``b_{eps,lambda}``, static estimators of velocities and drifts, and
Euler-Maruyama simulation of the corresponding diffusion.
"""

from .config import ExperimentConfig
from .env import EnvironmentSpec, make_env, points_in_ball, shifted_view
from .errors import (CalibrationError, ConfigError, DomainError, DriftLabError,
                     NumericalFailure, PropertyViolation)
from .fieldcheck import verify_field_properties
from .fields import DriftParams, c_field, drift_b, h_matrix, phi, phi_eps, phi_hat
from .kernels import KernelParams
from .sde import SdeConfig, annealed_slope, env_time_average, simulate_quenched
from .statics import calibrate, gamma_coeff, lambda_star, static_drift, velocity
from .theorems import reproduce_theorem

__version__ = "0.1.0"
