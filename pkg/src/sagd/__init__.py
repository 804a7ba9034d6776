"""Stochastic approximate gradient descent with underdamped Langevin gradients."""

from .core_math import RngStream, digamma, log_gamma, sigmoid, softplus
from .langevin import (ChainDivergence, ChainState, LangevinConfig, MomentDiagnostic,
                       estimate, langevin_step, run_chain)
from .metrics import Cdf1D, ks_distance, wasserstein1
from .optimizer import (AdamRule, Domain, Objective, SagdConfig, SagdDivergence, Schedule,
                        approximate_gradient, project, sagd_run, schedule_at)
from .potentials import (Potential, StabilityConstants, gamma_latent_posterior,
                         gaussian_potential, generator_posterior, step_size_bound)

__version__ = "0.1.0"
