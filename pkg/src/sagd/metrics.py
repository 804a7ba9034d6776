"""Kolmogorov-Smirnov and 1-Wasserstein distances between 1-D distributions.

Distributions are :class:`Cdf1D` objects: an empirical sample, a point mass,
or one of a few analytic families. Whenever one side is piecewise constant
(empirical or point mass) both distances are computed in closed form; two
analytic inputs fall back to a grid search (KS) and quadrature (W1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .oracles import QuadratureSpec, simpson_adaptive

_STEP_KINDS = ("empirical", "point")


@dataclass(frozen=True)
class Cdf1D:
    kind: str
    sample: np.ndarray = None      # sorted; for point masses the single location
    weights: np.ndarray = None
    means: np.ndarray = None
    sds: np.ndarray = None
    scale: float = None            # exponential mean

    # ---- constructors ----------------------------------------------------
    @classmethod
    def empirical(cls, sample):
        s = np.sort(np.asarray(sample, dtype=float).ravel())
        if s.size == 0 or not np.all(np.isfinite(s)):
            raise ValueError("empirical sample must be nonempty and finite")
        return cls("empirical", sample=s)

    @classmethod
    def point_mass(cls, at):
        return cls("point", sample=np.array([float(at)]))

    @classmethod
    def normal(cls, mean, sd):
        return cls.normal_mixture([1.0], [mean], [sd])

    @classmethod
    def normal_mixture(cls, weights, means, sds):
        w = np.asarray(weights, float)
        m = np.asarray(means, float)
        s = np.asarray(sds, float)
        if not (w.shape == m.shape == s.shape) or np.any(s <= 0) or np.any(w < 0):
            raise ValueError("mixture needs matching weights/means/sds with sd > 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        return cls("normal", weights=w, means=m, sds=s)

    @classmethod
    def exponential(cls, mean):
        if mean <= 0:
            raise ValueError("exponential mean must be positive")
        return cls("exponential", scale=float(mean))

    # ---- evaluation ------------------------------------------------------
    @property
    def is_step(self):
        return self.kind in _STEP_KINDS

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_step:
            return np.searchsorted(self.sample, x, side="right") / self.sample.size
        if self.kind == "exponential":
            return np.where(x > 0, -np.expm1(-np.maximum(x, 0) / self.scale), 0.0)
        z = (x[..., None] - self.means) / self.sds
        return np.sum(self.weights * special.ndtr(z), axis=-1)

    def cdf_left(self, x):
        """Left limit F(x-)."""
        x = np.asarray(x, dtype=float)
        if self.is_step:
            return np.searchsorted(self.sample, x, side="left") / self.sample.size
        return self.cdf(x)

    def integrated_cdf(self, x):
        """G(x) = integral of F over (-inf, x]."""
        x = np.asarray(x, dtype=float)
        if self.is_step:
            return np.sum(np.maximum(x[..., None] - self.sample, 0.0), axis=-1) / self.sample.size
        if self.kind == "exponential":
            xp = np.maximum(x, 0.0)
            return xp + self.scale * np.expm1(-xp / self.scale)
        z = (x[..., None] - self.means) / self.sds
        pdf = np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
        return np.sum(self.weights * ((x[..., None] - self.means) * special.ndtr(z) + self.sds * pdf), axis=-1)

    @property
    def mean(self):
        if self.is_step:
            return float(self.sample.mean())
        if self.kind == "exponential":
            return self.scale
        return float(np.sum(self.weights * self.means))

    def ppf(self, p):
        """Quantile function of an analytic distribution, vectorised over p in (0, 1)."""
        if self.is_step:
            raise ValueError("ppf is only provided for analytic distributions")
        p = np.asarray(p, dtype=float)
        if self.kind == "exponential":
            out = -self.scale * np.log1p(-p)
        elif self.means.size == 1:
            out = self.means[0] + self.sds[0] * special.ndtri(p)
        else:
            # the mixture quantile lies between the component quantiles
            comp = self.means + self.sds * special.ndtri(p[..., None])
            lo, hi = comp.min(axis=-1), comp.max(axis=-1)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                below = self.cdf(mid) < p
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
                if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(mid))):
                    break
            out = 0.5 * (lo + hi)
        return float(out) if out.ndim == 0 else out

    def support_range(self, tail=1e-12):
        if self.is_step:
            return float(self.sample[0]), float(self.sample[-1])
        lo = 0.0 if self.kind == "exponential" else self.ppf(tail)
        return lo, self.ppf(1.0 - tail)

    def draw(self, rng, m):
        """Draw ``m`` values using an :class:`~sagd.core_math.RngStream`."""
        if self.is_step:
            return self.sample[rng.integers(self.sample.size, m)]
        if self.kind == "exponential":
            return -self.scale * np.log1p(-rng.uniform(m))
        comp = np.searchsorted(np.cumsum(self.weights), rng.uniform(m), side="right")
        comp = np.minimum(comp, self.weights.size - 1)
        return self.means[comp] + self.sds[comp] * rng.normal(m)


def _jumps(a: Cdf1D, b: Cdf1D):
    pts = [d.sample for d in (a, b) if d.is_step]
    return np.unique(np.concatenate(pts))


def ks_distance(a: Cdf1D, b: Cdf1D) -> float:
    """sup_x |F_a(x) - F_b(x)|."""
    if a.is_step or b.is_step:
        # Between jump points the difference is monotone, so the sup is attained
        # at a jump or as a left limit into one.
        c = _jumps(a, b)
        right = np.abs(a.cdf(c) - b.cdf(c))
        left = np.abs(a.cdf_left(c) - b.cdf_left(c))
        return float(max(right.max(), left.max()))
    lo = min(a.support_range()[0], b.support_range()[0])
    hi = max(a.support_range()[1], b.support_range()[1])
    grid = np.linspace(lo, hi, 20001)
    diff = np.abs(a.cdf(grid) - b.cdf(grid))
    i = int(np.argmax(diff))
    l, u = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda t: -abs(float(a.cdf(t) - b.cdf(t))),
                                   bounds=(l, u), method="bounded", options={"xatol": 1e-12})
    return float(max(diff[i], -res.fun))


def _w1_step_vs_any(step: Cdf1D, other: Cdf1D) -> float:
    """Exact integral of |F_step - F_other| using the integrated CDF of ``other``."""
    if other.is_step:
        # both CDFs vanish left of the first atom and equal 1 right of the last
        pts = _jumps(step, other)
        l, u = pts[:-1], pts[1:]
        return float(np.sum(np.abs(step.cdf(l) - other.cdf(l)) * (u - l)))
    pts = np.unique(step.sample)
    G = other.integrated_cdf
    head = float(G(pts[0]))                            # F_step = 0 left of the first jump
    tail = float(G(pts[-1]) - pts[-1] + other.mean)    # F_step = 1 right of the last
    l, u = pts[:-1], pts[1:]
    c = step.cdf(l)                                    # F_step on [l, u)
    # F_other is continuous and increasing: it crosses level c at most once in
    # [l, u], at q; integrate (c - F) left of q and (F - c) right of it.
    inner = (c > 0) & (c < 1)
    q = np.where(c >= 1, u, l)
    if np.any(inner):
        q[inner] = np.clip(other.ppf(c[inner]), l[inner], u[inner])
    gl, gq, gu = G(l), G(q), G(u)
    body = c * (q - l) - (gq - gl) + (gu - gq) - c * (u - q)
    return head + tail + float(np.sum(body))


def wasserstein1(a: Cdf1D, b: Cdf1D) -> float:
    """Integral of |F_a - F_b| over the real line."""
    if a.is_step:
        return max(_w1_step_vs_any(a, b), 0.0)
    if b.is_step:
        return max(_w1_step_vs_any(b, a), 0.0)
    tail = 1e-10
    lo = min(a.support_range(tail)[0], b.support_range(tail)[0])
    hi = max(a.support_range(tail)[1], b.support_range(tail)[1])
    # the mass left outside [lo, hi] contributes at most a few times `tail`
    spec = QuadratureSpec(lo, hi, panels=256, tol=1e-10, max_doublings=16)
    return float(simpson_adaptive(lambda t: np.abs(a.cdf(t) - b.cdf(t)), spec))
