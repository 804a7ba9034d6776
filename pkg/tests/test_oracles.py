import math

import numpy as np
import pytest

from sagd.oracles import (QuadratureError, QuadratureSpec, finite_diff_grad, mc_expectation,
                          simpson_adaptive)


def test_simpson_constant_and_cubic():
    spec = QuadratureSpec(0.0, 1.0, panels=1)
    assert simpson_adaptive(lambda z: np.ones_like(z), spec) == 1.0
    assert simpson_adaptive(lambda z: z**2, spec) == pytest.approx(1 / 3, abs=1e-15)
    assert simpson_adaptive(lambda z: 4 * z**3 - z, spec) == pytest.approx(0.5, abs=1e-15)


def test_simpson_normal_density():
    val = simpson_adaptive(lambda z: np.exp(-z * z / 2) / math.sqrt(2 * math.pi))
    assert abs(val - 1.0) < 1e-10


def test_simpson_vector_valued():
    val = simpson_adaptive(lambda z: np.stack([np.ones_like(z), z * z]), QuadratureSpec(0, 2))
    assert val == pytest.approx([2.0, 8 / 3], abs=1e-12)


def test_simpson_gives_up():
    spec = QuadratureSpec(0.0, 1.0, panels=1, tol=1e-300, max_doublings=2)
    with pytest.raises(QuadratureError):
        simpson_adaptive(np.sqrt, spec)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(1.0, 0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(tol=0.0)


def test_finite_diff_linear_and_quadratic():
    c = np.array([1.5, -2.0, 0.25])
    x = np.array([0.3, 1.1, -4.0])
    assert np.allclose(finite_diff_grad(lambda v: c @ v, x, 1e-3), c, atol=1e-12)
    assert np.allclose(finite_diff_grad(lambda v: 0.5 * v @ v, x, 1e-4), x, atol=1e-8)


def test_finite_diff_error_is_quadratic_in_h():
    x = np.array([0.7, -0.2])
    exact = np.array([math.cos(0.7) * math.exp(-0.2), math.sin(0.7) * math.exp(-0.2)])
    f = lambda v: math.sin(v[0]) * math.exp(v[1])
    errs = [np.max(np.abs(finite_diff_grad(f, x, h) - exact)) for h in (1e-2, 1e-3, 1e-4)]
    ratios = np.log10(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((ratios > 1.7) & (ratios < 2.3))


def test_mc_expectation(rng):
    normal = lambda r, m: r.normal(m)
    mean, se = mc_expectation(normal, lambda u: np.full_like(u, 3.0), 100, rng)
    assert mean == 3.0 and se == 0.0
    mean, se = mc_expectation(normal, lambda u: u, 1_000_000, rng.substream(1))
    assert abs(mean) <= 4 * se
    mean, se = mc_expectation(normal, lambda u: u * u, 1_000_000, rng.substream(2))
    assert abs(mean - 1.0) <= 4 * se
    with pytest.raises(ValueError):
        mc_expectation(normal, lambda u: u, 1, rng)
