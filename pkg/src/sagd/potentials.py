"""Target distributions written as potentials V = -log(density) + const.

All value/gradient callables take arrays whose last axis holds the ``dim``
coordinates; any leading axes index independent chains. ``value`` returns
the leading shape, ``gradient`` the input shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core_math import digamma, log_gamma, sigmoid


@dataclass
class Potential:
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    nu: Optional[float] = None  # bound on the Hessian operator norm, if known
    name: str = "potential"
    _warned: bool = field(default=False, repr=False, compare=False)


def gaussian_potential(mean, dim=None) -> Potential:
    """Standard-covariance normal centred at ``mean``: V = |xi - mean|^2 / 2."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if dim is None:
        dim = mean.size
    if dim < 1:
        raise ValueError("dim must be at least 1")
    mu = np.broadcast_to(mean, (dim,)).copy()

    def value(xi):
        d = np.asarray(xi) - mu
        return 0.5 * np.sum(d * d, axis=-1)

    def gradient(xi):
        return np.asarray(xi) - mu

    return Potential(dim, value, gradient, nu=1.0, name="gaussian")


def gamma_latent_posterior(data, a: float, b: float) -> Potential:
    """Posterior of z in the model z ~ N(0,1), x | z ~ Gamma(10 sigmoid(a + b z)).

    One coordinate per observation; the potential is a sum of independent
    scalar terms.
    """
    x = np.atleast_1d(np.asarray(data, dtype=float))
    if np.any(~(x > 0)):
        raise ValueError("gamma-latent observations must be positive")
    logx = np.log(x)

    def value(z):
        z = np.asarray(z, dtype=float)
        s = 10.0 * sigmoid(a + b * z)
        return np.sum(0.5 * z * z - (s - 1.0) * logx + log_gamma(s), axis=-1)

    def gradient(z):
        z = np.asarray(z, dtype=float)
        sg = sigmoid(a + b * z)
        s = 10.0 * sg
        return z - 10.0 * b * sg * (1.0 - sg) * (logx - digamma(s))

    return Potential(x.size, value, gradient, nu=None, name="gamma_latent")


def generator_posterior(x, net, noise_var: float = 1.0) -> Potential:
    """Posterior of the latent u given x = h(u) + N(0, noise_var) noise, u ~ N(0,1).

    A 1-D ``x`` gives one latent coordinate per entry (a separable potential
    of dimension ``len(x)``). A column ``x`` of shape ``(B, 1)`` instead gives
    a 1-D potential whose observation differs per stacked chain, which is how
    a minibatch runs as B independent chains.
    ``net`` needs ``forward(u)`` and ``forward_and_input_grad(u)``.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        x = np.atleast_1d(x)

    def value(u):
        u = np.asarray(u, dtype=float)
        r = x - net.forward(u)
        return np.sum(0.5 * r * r / noise_var + 0.5 * u * u, axis=-1)

    def gradient(u):
        u = np.asarray(u, dtype=float)
        h, dh = net.forward_and_input_grad(u)
        return -(x - h) / noise_var * dh + u

    return Potential(x.shape[-1], value, gradient, nu=None, name="generator")


@dataclass(frozen=True)
class StabilityConstants:
    nu: float
    beta: float
    alpha: float
    gamma: float

    @property
    def c_beta(self) -> float:
        b = self.beta
        return b * (2.0 - b) / (8.0 * (1.0 - b))


def step_size_bound(c: StabilityConstants) -> float:
    """Largest Langevin step keeping all moments of the chain bounded.

    min{1/gamma, gamma/(2 nu), (D + 1 - sqrt(D^2 + 1))/gamma} with
    D = gamma^4 C_beta / nu^2.
    """
    if not (c.nu > 0 and c.gamma > 0 and 0 < c.beta < 1):
        raise ValueError("need nu > 0, gamma > 0 and 0 < beta < 1")
    g = c.gamma
    d = g**4 * c.c_beta / c.nu**2
    return min(1.0 / g, g / (2.0 * c.nu), _root_gap(d) / g)


def _root_gap(d: float) -> float:
    """D + 1 - sqrt(D^2 + 1) in a cancellation-free form for each regime."""
    if d <= 1.0:
        return d - d * d / (1.0 + math.sqrt(d * d + 1.0))
    return 1.0 - 1.0 / (d + math.sqrt(d * d + 1.0))
