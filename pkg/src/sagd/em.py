"""Automated Monte Carlo EM for the gamma-latent model.

Model: z_i ~ N(0, 1), x_i | z_i ~ Gamma(shape = 10 * sigmoid(a + b z_i), scale = 1).

Each M-step ascends Q(theta; theta_k) = E_{z | x, theta_k}[L(theta; x, z)] for a
fixed number of gradient updates. The expectation is either estimated by a
Langevin chain on the posterior of z (mode ``"sagd"``) or computed by 1-D
quadrature per observation (mode ``"exact_gd"``).

The M-step objective is Q divided by the number of observations so the step
size does not depend on the sample size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core_math import RngStream, digamma, log_gamma, sigmoid
from .langevin import ChainState
from .optimizer import Domain, Objective, SagdConfig, Schedule, sagd_run
from .oracles import QuadratureError, QuadratureSpec, simpson_adaptive
from .potentials import gamma_latent_posterior

_SHAPE_SCALE = 10.0


@dataclass
class GammaLatentModel:
    data: np.ndarray
    theta: tuple = (2.0, 0.5)
    latent: Optional[np.ndarray] = None  # the simulated z, when known

    def __post_init__(self):
        self.data = np.atleast_1d(np.asarray(self.data, dtype=float))
        if np.any(~(self.data > 0)):
            raise ValueError("gamma-latent observations must be positive")

    @property
    def n(self):
        return self.data.size


def simulate_gamma_data(n: int, a: float, b: float, rng: RngStream) -> GammaLatentModel:
    if n < 1:
        raise ValueError("n must be at least 1")
    z = rng.normal(n)
    shape = _SHAPE_SCALE * sigmoid(a + b * z)
    x = rng.gamma(shape)
    return GammaLatentModel(x, (float(a), float(b)), z)


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("x must be positive")
    return x


def complete_loglik(theta, x, z):
    """L(theta; x, z) = -z^2/2 + (s-1) log x - log Gamma(s), s = 10 sigmoid(a + b z)."""
    a, b = theta
    x = _check_x(x)
    z = np.asarray(z, dtype=float)
    s = _SHAPE_SCALE * sigmoid(a + b * z)
    return -0.5 * z * z + (s - 1.0) * np.log(x) - log_gamma(s)


def q_grad_terms(theta, x, z):
    """Gradient of :func:`complete_loglik` in (a, b); last axis of the result."""
    a, b = theta
    x = _check_x(x)
    z = np.asarray(z, dtype=float)
    sg = sigmoid(a + b * z)
    common = _SHAPE_SCALE * sg * (1.0 - sg) * (np.log(x) - digamma(_SHAPE_SCALE * sg))
    return np.stack(np.broadcast_arrays(common, z * common), axis=-1)


class _Posterior:
    """Quadrature machinery for the per-observation posteriors of z under theta_k."""

    def __init__(self, theta_k, data, quad: QuadratureSpec):
        self.theta_k = tuple(float(t) for t in theta_k)
        self.x = data[:, None]
        self.quad = quad
        grid = np.linspace(quad.lo, quad.hi, 4001)
        # per-observation shift keeps exp() in range; it cancels in ratios
        self.shift = complete_loglik(self.theta_k, self.x, grid[None, :]).max(axis=1)

    def weights(self, z):
        return np.exp(complete_loglik(self.theta_k, self.x, z[None, :]) - self.shift[:, None])

    def log_normalizers(self):
        mass = simpson_adaptive(self.weights, self.quad)
        if np.any(mass < 1e-300):
            raise QuadratureError("posterior normaliser underflowed")
        return np.log(mass) + self.shift

    def expect(self, fn):
        """Posterior means of ``fn(z)`` (shape ``(n, m, nodes)``) per observation."""
        def integrand(z):
            w = self.weights(z)
            vals = fn(z)
            return np.concatenate([w[:, None, :], w[:, None, :] * vals], axis=1)

        out = simpson_adaptive(integrand, self.quad)
        mass = out[:, 0]
        if np.any(mass < 1e-300):
            raise QuadratureError("posterior normaliser underflowed")
        return out[:, 1:] / mass[:, None]


def q_gradient_exact(theta_k, theta, model: GammaLatentModel, quad: QuadratureSpec = QuadratureSpec()):
    """dQ(theta; theta_k)/dtheta summed over observations, by quadrature."""
    post = _Posterior(theta_k, model.data, quad)
    x = post.x

    def terms(z):
        g = q_grad_terms(theta, x, z[None, :])  # (n, nodes, 2)
        return np.moveaxis(g, -1, 1)

    return post.expect(terms).sum(axis=0)


def q_value_exact(theta_k, theta, model: GammaLatentModel, quad: QuadratureSpec = QuadratureSpec()):
    """Q(theta; theta_k) summed over observations, by quadrature."""
    post = _Posterior(theta_k, model.data, quad)
    x = post.x
    vals = post.expect(lambda z: complete_loglik(theta, x, z[None, :])[:, None, :])
    return float(vals.sum())


def marginal_loglik(theta, model: GammaLatentModel, quad: QuadratureSpec = QuadratureSpec()):
    """Log-likelihood of the data with z integrated out.

    Includes the normal and gamma normalising constants dropped from
    :func:`complete_loglik`, so for b = 0 it equals the gamma log-density.
    """
    post = _Posterior(theta, model.data, quad)
    consts = -0.5 * math.log(2.0 * math.pi) - model.data
    return float(np.sum(post.log_normalizers() + consts))


# --------------------------------------------------------------------------

def reference_inner_config(T=100) -> SagdConfig:
    """Inner settings of the reference experiment.

    alpha = 0.2 constant, delta_t = 0.1/sqrt(t), K_t = t + 20, 100 burn-in steps.
    """
    return SagdConfig(
        T=T,
        schedule=Schedule("convex", c1=0.1, c2=1.0, alpha0=0.2, k0=20, constant_alpha=True),
        gamma=2.0, burn_in=100, chains=1, persistent=True, return_average=False)


@dataclass
class EmConfig:
    outer_steps: int = 3
    inner: SagdConfig = field(default_factory=reference_inner_config)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    mode: str = "sagd"
    loglik_every: int = 1  # 0 disables log-likelihood tracking
    updates: Optional[int] = None  # gradient updates per M-step; None uses inner.T, 0 skips

    def __post_init__(self):
        if self.outer_steps < 1:
            raise ValueError("need at least one M-step")
        if self.updates is not None and self.updates < 0:
            raise ValueError("updates must be nonnegative")
        if self.mode not in ("sagd", "exact_gd"):
            raise ValueError(f"unknown EM mode {self.mode!r}")


@dataclass
class EmResult:
    theta_path: np.ndarray        # (updates + 1, 2), row 0 is theta_0
    mstep: np.ndarray             # M-step index of each row (0 for theta_0)
    loglik_path: np.ndarray       # same rows; NaN where not evaluated

    @property
    def theta(self):
        return self.theta_path[-1]


def _mstep_objective(model: GammaLatentModel, theta_k):
    n = model.n
    x = model.data

    def grad_f(theta, z):
        # f = -(1/n) sum_i L(theta; x_i, z_i)
        return -q_grad_terms(theta, x, z).sum(axis=-2) / n

    return Objective(2, n, grad_f, potential=gamma_latent_posterior(x, *theta_k))


def em_run(model: GammaLatentModel, theta0, cfg: EmConfig = EmConfig(),
           rng: Optional[RngStream] = None) -> EmResult:
    """EM with gradient-based M-steps; every inner update is recorded."""
    if rng is None:
        rng = RngStream(0)
    theta = np.asarray(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    thetas = [theta.copy()]
    steps = [0]
    xi0 = np.zeros(model.n)
    rho0 = np.zeros(model.n)
    n = model.n
    inner = cfg.inner if cfg.updates is None else (
        replace(cfg.inner, T=cfg.updates) if cfg.updates > 0 else None)

    for k in range(1, cfg.outer_steps + 1):
        if inner is None:
            break
        theta_k = theta.copy()
        obj = _mstep_objective(model, theta_k)
        oracle = None
        if cfg.mode == "exact_gd":
            def oracle(th, theta_k=theta_k):
                return -q_gradient_exact(theta_k, th, model, cfg.quadrature) / n
        res = sagd_run(obj, Domain(), inner, theta, xi0, rho0,
                       rng.substream(k), gradient_oracle=oracle)
        if res.chain_state is not None:
            # warm-start the next M-step's chain where this one ended
            xi0, rho0 = res.chain_state.xi[0], res.chain_state.rho[0]
        for rec in res.trajectory:
            thetas.append(rec.theta)
            steps.append(k)
        theta = res.theta_last

    path = np.array(thetas)
    ll = np.full(len(path), np.nan)
    if cfg.loglik_every:
        for i in range(len(path)):
            if i % cfg.loglik_every == 0 or i == len(path) - 1:
                ll[i] = marginal_loglik(path[i], model, cfg.quadrature)
    return EmResult(path, np.array(steps), ll)
