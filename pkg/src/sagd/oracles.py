"""Independent numerical checks: quadrature, finite differences, plain Monte Carlo.

These are deliberately simple so they can vouch for the faster code paths.
The exact-gradient EM mode also runs on top of :func:`simpson_adaptive`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    lo: float = -8.0
    hi: float = 8.0
    panels: int = 64
    tol: float = 1e-10
    max_doublings: int = 12

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("quadrature interval needs lo < hi")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.panels < 1:
            raise ValueError("need at least one panel")


def _simpson(values, h):
    # values sampled on 2m+1 equispaced nodes along the last axis
    return h / 3.0 * (values[..., 0] + values[..., -1]
                      + 4.0 * values[..., 1:-1:2].sum(axis=-1)
                      + 2.0 * values[..., 2:-1:2].sum(axis=-1))


def simpson_adaptive(f, spec: QuadratureSpec = QuadratureSpec()):
    """Composite Simpson rule with panel doubling.

    ``f`` is called with a 1-D array of nodes and must return values with the
    nodes on the last axis, so vector-valued integrands are integrated in one
    sweep. Doubling stops once successive estimates agree to ``spec.tol`` in
    max-norm. Raises :class:`QuadratureError` when ``max_doublings`` is hit.
    """
    panels = spec.panels
    prev = None
    for _ in range(spec.max_doublings + 1):
        nodes = np.linspace(spec.lo, spec.hi, 2 * panels + 1)
        est = _simpson(np.asarray(f(nodes), dtype=float),
                       (spec.hi - spec.lo) / (2 * panels))
        if prev is not None and np.max(np.abs(est - prev)) < spec.tol:
            return float(est) if np.ndim(est) == 0 else est
        prev = est
        panels *= 2
    raise QuadratureError(
        f"Simpson rule did not reach tol={spec.tol} after {spec.max_doublings} doublings")


def finite_diff_grad(f, x, h=1e-6):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    if h <= 0:
        raise ValueError("h must be positive")
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def relative_error(approx, exact, floor=1e-8):
    """Elementwise |approx - exact| / max(|exact|, floor)."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return np.abs(approx - exact) / np.maximum(np.abs(exact), floor)


def mc_expectation(sampler, phi, m, rng):
    """Plain Monte Carlo mean of ``phi`` with its standard error.

    ``sampler(rng, m)`` returns ``m`` draws; ``phi`` maps the draws to values
    elementwise.
    """
    if m < 2:
        raise ValueError("need at least two draws for a standard error")
    vals = np.asarray(phi(sampler(rng, m)), dtype=float)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(m)
    return mean, se
