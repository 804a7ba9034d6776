"""Explicit-Euler underdamped Langevin chain and time-average estimators.

One step maps (xi, rho) to

    xi'  = xi + delta * rho
    rho' = (1 - gamma*delta) * rho - delta * grad V(xi) + sqrt(2*gamma*delta) * eta

with the gradient taken at the *old* position and eta ~ N(0, I).

Several independent chains can be advanced together by stacking their states
along a leading axis and passing one :class:`RngStream` per chain. Every chain
still consumes its own stream in order, so its trajectory is the same as if it
had been run alone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core_math import RngStream
from .potentials import Potential, gaussian_potential

log = logging.getLogger(__name__)

_NOISE_BLOCK = 2048


class ChainDivergence(ArithmeticError):
    """The chain produced a non-finite state; the step size is too large."""

    def __init__(self, step, msg="non-finite state", chain=None):
        self.step = step
        self.chain = chain
        where = f"step {step}" if chain is None else f"chain {chain}, step {step}"
        super().__init__(f"{msg} at {where}; reduce delta")


@dataclass
class ChainState:
    xi: np.ndarray
    rho: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.xi.shape != self.rho.shape:
            raise ValueError(f"xi {self.xi.shape} and rho {self.rho.shape} differ in shape")

    @classmethod
    def zeros(cls, dim, chains=None):
        shape = (dim,) if chains is None else (chains, dim)
        return cls(np.zeros(shape), np.zeros(shape))

    def copy(self):
        return ChainState(self.xi.copy(), self.rho.copy(), self.step_count)


@dataclass(frozen=True)
class LangevinConfig:
    gamma: float = 2.0
    delta: float = 0.05
    steps: int = 1000
    burn_in: int = 0

    def __post_init__(self):
        if self.gamma <= 0 or self.delta <= 0:
            raise ValueError("gamma and delta must be positive")
        if self.gamma * self.delta >= 1:
            raise ValueError(
                f"gamma*delta = {self.gamma * self.delta:g} must be < 1 "
                "so the momentum damping factor stays positive")
        if self.steps < 1 or self.burn_in < 0:
            raise ValueError("need steps >= 1 and burn_in >= 0")


def langevin_step(state: ChainState, pot: Potential, cfg: LangevinConfig, noise) -> ChainState:
    """Advance the chain by one step with the supplied standard-normal ``noise``."""
    noise = np.asarray(noise, dtype=float)
    if noise.shape != state.xi.shape or state.xi.shape[-1] != pot.dim:
        raise ValueError(
            f"dimension mismatch: state {state.xi.shape}, noise {noise.shape}, potential dim {pot.dim}")
    d, g = cfg.delta, cfg.gamma
    xi = state.xi + d * state.rho
    rho = (1.0 - g * d) * state.rho - d * pot.gradient(state.xi) + math.sqrt(2.0 * g * d) * noise
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(rho))):
        raise ChainDivergence(state.step_count + 1)
    return ChainState(xi, rho, state.step_count + 1)


_warned_unchecked: set = set()


def _check_delta(pot: Potential, cfg: LangevinConfig):
    if pot.nu is None:
        if pot.name not in _warned_unchecked:
            log.warning("no smoothness constant for %s potential; accepting delta=%g unchecked",
                        pot.name, cfg.delta)
            _warned_unchecked.add(pot.name)
        return
    limit = min(1.0 / cfg.gamma, cfg.gamma / (2.0 * pot.nu))
    if cfg.delta > limit and not pot._warned:
        log.warning("delta=%g exceeds min(1/gamma, gamma/(2 nu)) = %g for %s potential",
                    cfg.delta, limit, pot.name)
        pot._warned = True


def _noise_blocks(rng, shape, n_steps):
    """Yield standard-normal noise in blocks of consecutive steps."""
    if isinstance(rng, np.ndarray):
        if rng.shape != (n_steps,) + shape:
            raise ValueError(f"pre-drawn noise has shape {rng.shape}, need {(n_steps,) + shape}")
        yield rng
        return
    done = 0
    while done < n_steps:
        nb = min(_NOISE_BLOCK, n_steps - done)
        if isinstance(rng, RngStream):
            yield rng.normal((nb,) + shape)
        else:
            # one stream per stacked chain along axis 0 of the state
            yield np.stack([r.normal((nb,) + shape[1:]) for r in rng], axis=1)
        done += nb


Rng = Union[RngStream, Sequence[RngStream], np.ndarray]


def run_chain(pot: Potential, cfg: LangevinConfig, init: ChainState, rng: Rng,
              observer: Optional[Callable[[np.ndarray, np.ndarray], None]] = None) -> ChainState:
    """Run ``cfg.burn_in`` discarded steps, then ``cfg.steps`` observed ones.

    ``observer(xi, rho)`` sees each post-burn-in state (after its step). The
    final state is returned so callers can keep a persistent chain.

    ``rng`` is a single stream for one chain, or a sequence of streams when
    ``init`` stacks several chains along axis 0. A pre-drawn noise array of
    shape ``(burn_in + steps,) + init.xi.shape`` is also accepted.
    """
    xi, rho = init.xi, init.rho
    if xi.shape[-1] != pot.dim:
        raise ValueError(f"state dimension {xi.shape[-1]} != potential dim {pot.dim}")
    if isinstance(rng, (list, tuple)) and (xi.ndim != 2 or len(rng) != xi.shape[0]):
        raise ValueError("need one RngStream per stacked chain")
    _check_delta(pot, cfg)

    d, g = cfg.delta, cfg.gamma
    damp = 1.0 - g * d
    scale = math.sqrt(2.0 * g * d)
    grad = pot.gradient
    total = cfg.burn_in + cfg.steps
    k = 0
    for block in _noise_blocks(rng, xi.shape, total):
        xi0, rho0, k0 = xi, rho, k
        for eta in block:
            xi, rho = xi + d * rho, damp * rho - d * grad(xi) + scale * eta
            k += 1
            if k > cfg.burn_in and observer is not None:
                observer(xi, rho)
        # non-finite values persist, so one check per block suffices; on
        # failure the block is replayed with its noise to find the exact step
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(rho))):
            raise _locate_divergence(pot, cfg, ChainState(xi0, rho0, init.step_count + k0), block)
    return ChainState(xi, rho, init.step_count + total)


def _locate_divergence(pot, cfg, state, block):
    d, g = cfg.delta, cfg.gamma
    xi, rho = state.xi, state.rho
    with np.errstate(all="ignore"):
        for i, eta in enumerate(block, start=1):
            xi, rho = xi + d * rho, (1.0 - g * d) * rho - d * pot.gradient(xi) + math.sqrt(2.0 * g * d) * eta
            bad = ~(np.isfinite(xi) & np.isfinite(rho))
            if bad.any():
                chain = int(np.argwhere(bad)[0][0]) if xi.ndim == 2 else None
                return ChainDivergence(state.step_count + i, chain=chain)
    return ChainDivergence(state.step_count + len(block))


def estimate(pot: Potential, cfg: LangevinConfig, init: ChainState, rng: Rng,
             phi: Callable[[np.ndarray, np.ndarray], np.ndarray], return_state: bool = False):
    """Time average of ``phi(xi, rho)`` over the observed states.

    Single pass, memory independent of ``cfg.steps``. With stacked chains
    ``phi`` is applied row-wise (it receives ``(chains, dim)`` arrays and
    returns one row per chain) and the chains are averaged with equal weight.
    """
    acc = None
    count = 0

    def observe(xi, rho):
        nonlocal acc, count
        v = np.asarray(phi(xi, rho), dtype=float)
        acc = v.copy() if acc is None else acc + v
        count += 1

    final = run_chain(pot, cfg, init, rng, observe)
    avg = acc / count
    if init.xi.ndim == 2:
        avg = avg.mean(axis=0)
    return (avg, final) if return_state else avg


class MomentDiagnostic:
    """Tracks ||xi||^{2l} + ||rho||^{2l} along a trajectory.

    Use as the observer of :func:`run_chain`. A chain counts as unstable when
    the second-half mean exceeds ten times the first-half mean.
    """

    def __init__(self, l: int = 1):
        if l not in (1, 2, 3):
            raise ValueError("moment order l must be 1, 2 or 3")
        self.l = l
        self._values: list[float] = []

    def __call__(self, xi, rho):
        self._values.append(float(np.sum(xi * xi) ** self.l + np.sum(rho * rho) ** self.l))

    @property
    def count(self):
        return len(self._values)

    @property
    def mean(self):
        return float(np.mean(self._values)) if self._values else 0.0

    @property
    def max(self):
        return float(np.max(self._values)) if self._values else 0.0

    def half_means(self):
        v = np.asarray(self._values)
        h = len(v) // 2
        if h == 0:
            return self.mean, self.mean
        return float(v[:h].mean()), float(v[h:].mean())

    @property
    def growth_ratio(self):
        first, second = self.half_means()
        if first == 0.0:
            return 1.0 if second == 0.0 else math.inf
        return second / first

    @property
    def unstable(self):
        return self.growth_ratio > 10.0


def bias_scan(deltas, steps, reps, rng: RngStream, dim=2, gamma=2.0, burn_in=0):
    """Bias and MSE of the time average of ||xi||^2 on a standard normal target.

    For each ``(delta, K)`` pair, ``reps`` independent chains (substreams
    ``(i, rep)``) each give one estimate; the exact value is ``dim``.
    Returns rows ``(delta, K, bias, mse, reps)`` with bias = mean error.
    """
    pot = gaussian_potential(np.zeros(dim))
    rows = []
    for i, (delta, K) in enumerate(zip(deltas, steps)):
        cfg = LangevinConfig(gamma, float(delta), int(K), burn_in)
        acc = np.zeros(reps)

        def observe(xi, rho):
            nonlocal acc
            acc = acc + np.sum(xi * xi, axis=1)

        streams = [rng.substream(i, r) for r in range(reps)]
        run_chain(pot, cfg, ChainState.zeros(dim, chains=reps), streams, observe)
        err = acc / K - dim
        rows.append((float(delta), int(K), float(err.mean()), float(np.mean(err * err)), reps))
    return rows
