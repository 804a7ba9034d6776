"""Stochastic approximate gradient descent.

Minimises F(theta) = E[f(theta; xi)] where xi follows a density known only
through its potential. Each outer iteration runs Langevin chains on that
potential, averages grad f(theta; xi_k) over the visited states, and takes a
projected gradient step. Step size, chain step size and chain length follow
a :class:`Schedule`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core_math import RngStream
from .langevin import ChainDivergence, ChainState, LangevinConfig, run_chain
from .potentials import Potential


# --------------------------------------------------------------------------
# feasible sets

@dataclass(frozen=True)
class Domain:
    """Closed convex parameter set: unconstrained, a box, or a Euclidean ball."""

    kind: str = "unconstrained"
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if self.kind == "box":
            lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
            if lo.shape != hi.shape or np.any(lo > hi):
                raise ValueError("box needs lower <= upper with matching shapes")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "ball":
            if self.radius is None or self.radius <= 0:
                raise ValueError("ball radius must be positive")
            object.__setattr__(self, "center", np.asarray(self.center, float))
        elif self.kind != "unconstrained":
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def box(cls, lower, upper):
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", center=center, radius=float(radius))

    @property
    def diameter(self):
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        if self.kind == "ball":
            return 2.0 * self.radius
        return math.inf


def project(theta, dom: Domain):
    """Euclidean projection of ``theta`` onto ``dom``."""
    theta = np.asarray(theta, dtype=float)
    if dom.kind == "unconstrained":
        return theta.copy()
    if dom.kind == "box":
        if theta.shape != dom.lower.shape:
            raise ValueError("theta and box bounds differ in shape")
        return np.clip(theta, dom.lower, dom.upper)
    d = theta - dom.center
    norm = float(np.linalg.norm(d))
    if norm <= dom.radius:
        return theta.copy()
    return dom.center + d * (dom.radius / norm)


# --------------------------------------------------------------------------
# schedules

@dataclass(frozen=True)
class Schedule:
    """Hyperparameter sequences (delta_t, K_t, alpha_t), t = 1, 2, ...

    convex:     delta = c1/sqrt(t),  K = ceil(c2 t) + k0,       alpha = alpha0/sqrt(t)
    nonconvex:  delta = c1 t^-c,     K = ceil(c2 t^(2c)) + k0,  alpha = alpha0/t
    fixed:      delta = c1,          K = ceil(c2) + k0,         alpha = alpha0

    ``constant_alpha`` keeps alpha at alpha0 for any kind.
    """

    kind: str = "convex"
    c1: float = 0.1
    c2: float = 1.0
    alpha0: float = 0.1
    c: float = 0.5
    k0: int = 0
    constant_alpha: bool = False

    def __post_init__(self):
        if self.kind not in ("convex", "nonconvex", "fixed"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.c1 <= 0 or self.c2 <= 0 or self.alpha0 < 0 or self.c <= 0 or self.k0 < 0:
            raise ValueError("schedule constants must be positive (alpha0, k0 nonnegative)")


def schedule_at(s: Schedule, t: int):
    """Return ``(delta_t, K_t, alpha_t)`` for outer iteration ``t >= 1``."""
    if t < 1:
        raise ValueError("schedules are indexed from t = 1")
    if s.kind == "convex":
        delta, k, alpha = s.c1 / math.sqrt(t), s.c2 * t, s.alpha0 / math.sqrt(t)
    elif s.kind == "nonconvex":
        delta, k, alpha = s.c1 * t ** -s.c, s.c2 * t ** (2 * s.c), s.alpha0 / t
    else:
        delta, k, alpha = s.c1, s.c2, s.alpha0
    if s.constant_alpha:
        alpha = s.alpha0
    # guard against 2.0000000000000004-style roundoff before the ceiling
    k_int = int(math.ceil(k - 1e-9)) + s.k0
    return delta, max(k_int, 1), alpha


# --------------------------------------------------------------------------
# objective and config

@dataclass
class Objective:
    """F(theta) = E_{xi ~ pi}[f(theta; xi)] described through grad f and pi.

    ``grad_f(theta, xi)`` must broadcast over leading axes of ``xi`` (stacked
    chains) and return shape ``xi.shape[:-1] + (dim_theta,)``.

    Give either a fixed ``potential`` or a ``potential_builder(theta)``. The
    builder ("coupled" mode) rebuilds the target from the current iterate
    before every sampling phase; convergence guarantees assume a fixed target.
    """

    dim_theta: int
    dim_xi: int
    grad_f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    potential: Optional[Potential] = None
    potential_builder: Optional[Callable[[np.ndarray], Potential]] = None

    def __post_init__(self):
        if (self.potential is None) == (self.potential_builder is None):
            raise ValueError("give exactly one of potential / potential_builder")

    def target(self, theta) -> Potential:
        if self.potential is not None:
            return self.potential
        return self.potential_builder(theta)


@dataclass(frozen=True)
class AdamRule:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class SagdConfig:
    T: int = 100
    schedule: Schedule = field(default_factory=Schedule)
    gamma: float = 2.0
    burn_in: int = 0
    chains: int = 1
    persistent: bool = True
    update_rule: Optional[AdamRule] = None  # None means plain projected SGD
    return_average: bool = True

    def __post_init__(self):
        if self.T < 1 or self.chains < 1:
            raise ValueError("need T >= 1 and chains >= 1")


# --------------------------------------------------------------------------
# the algorithm

def approximate_gradient(theta, obj: Objective, pot: Potential, delta, K, burn_in,
                         chains, rng: RngStream, persistent_state: Optional[ChainState] = None,
                         gamma=2.0, init: Optional[ChainState] = None):
    """Langevin time-average of grad f(theta; xi) over ``chains`` chains.

    Chain ``c`` draws its noise from ``rng.substream(c)``. A given
    ``persistent_state`` (stacked, one row per chain) is resumed without
    burn-in; otherwise chains start from ``init`` (zeros by default) and
    discard ``burn_in`` steps. Returns ``(g, final_state)``.
    """
    theta = np.asarray(theta, dtype=float)
    if persistent_state is not None:
        start, burn = persistent_state, 0
    else:
        if init is None:
            init = ChainState.zeros(obj.dim_xi)
        start = ChainState(np.broadcast_to(init.xi, (chains, obj.dim_xi)).copy(),
                           np.broadcast_to(init.rho, (chains, obj.dim_xi)).copy())
        burn = burn_in
    cfg = LangevinConfig(gamma=gamma, delta=delta, steps=K, burn_in=burn)
    acc = np.zeros(obj.dim_theta)

    def observe(xi, rho):
        nonlocal acc
        acc = acc + np.sum(obj.grad_f(theta, xi), axis=0)

    streams = [rng.substream(c) for c in range(chains)]
    final = run_chain(pot, cfg, start, streams, observe)
    return acc / (K * chains), final


def adam_update(theta, g, state, alpha, rule: AdamRule, dom: Domain = Domain()):
    """One projected Adam step. ``state`` is ``(m, v, t)``, start from ``(0, 0, 0)``."""
    m, v, t = state
    t += 1
    m = rule.beta1 * m + (1.0 - rule.beta1) * g
    v = rule.beta2 * v + (1.0 - rule.beta2) * g * g
    m_hat = m / (1.0 - rule.beta1 ** t) if rule.beta1 > 0 else m
    v_hat = v / (1.0 - rule.beta2 ** t) if rule.beta2 > 0 else v
    theta = project(theta - alpha * m_hat / (np.sqrt(v_hat) + rule.eps), dom)
    return theta, (m, v, t)


@dataclass
class IterationRecord:
    t: int
    theta: np.ndarray
    delta: float
    K: int
    alpha: float
    grad_norm: float


@dataclass
class SagdResult:
    theta_hat: np.ndarray
    theta_last: np.ndarray
    trajectory: list
    chain_state: Optional[ChainState] = None


class SagdDivergence(ArithmeticError):
    """A chain blew up mid-run; ``result`` holds the iterations completed so far."""

    def __init__(self, result: SagdResult, cause: ChainDivergence, t: int):
        self.result = result
        self.t = t
        super().__init__(f"outer iteration {t}: {cause}")


def sagd_run(obj: Objective, dom: Domain, cfg: SagdConfig, theta0, xi0=None, rho0=None,
             rng: Optional[RngStream] = None, gradient_oracle=None,
             chain_state: Optional[ChainState] = None) -> SagdResult:
    """Run T outer iterations of stochastic approximate gradient descent.

    theta_{t+1} = P(theta_t - alpha_t * g_t), with g_t the Langevin gradient
    estimate (or ``gradient_oracle(theta)`` when given, which skips sampling).
    ``theta_hat`` averages theta_1..theta_T when ``cfg.return_average``.

    ``chain_state`` resumes previously stored persistent chains; the final
    chain state is returned in the result.
    """
    if rng is None:
        rng = RngStream(0)
    theta = project(np.asarray(theta0, dtype=float), dom)
    init = ChainState(np.zeros(obj.dim_xi) if xi0 is None else xi0,
                      np.zeros(obj.dim_xi) if rho0 is None else rho0)
    persistent = chain_state if cfg.persistent else None
    adam_state = (0.0, 0.0, 0)
    total = np.zeros_like(theta)
    trajectory = []

    for t in range(1, cfg.T + 1):
        delta, K, alpha = schedule_at(cfg.schedule, t)
        if gradient_oracle is not None:
            g = np.asarray(gradient_oracle(theta), dtype=float)
        else:
            try:
                g, final = approximate_gradient(
                    theta, obj, obj.target(theta), delta, K, cfg.burn_in, cfg.chains,
                    rng.substream(t), persistent, cfg.gamma, init)
            except ChainDivergence as err:
                partial = _result(total, len(trajectory), theta, trajectory, persistent, cfg)
                raise SagdDivergence(partial, err, t) from err
            if cfg.persistent:
                persistent = final
        if cfg.update_rule is None:
            theta = project(theta - alpha * g, dom)
        else:
            theta, adam_state = adam_update(theta, g, adam_state, alpha, cfg.update_rule, dom)
        total += theta
        trajectory.append(IterationRecord(t, theta.copy(), delta, K, alpha, float(np.linalg.norm(g))))

    return _result(total, cfg.T, theta, trajectory, persistent, cfg)


def _result(total, n, theta, trajectory, chain_state, cfg):
    avg = total / n if n else theta.copy()
    hat = avg if cfg.return_average else theta.copy()
    return SagdResult(hat, theta.copy(), trajectory, chain_state)
