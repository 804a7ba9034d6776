import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from sagd.core_math import digamma, log_gamma
from sagd.genmodel import Mlp1D
from sagd.oracles import finite_diff_grad, relative_error
from sagd.potentials import (StabilityConstants, gamma_latent_posterior, gaussian_potential,
                             generator_posterior, step_size_bound)


def fd_check(pot, points, tol=1e-5):
    worst = 0.0
    for xi in points:
        h = 1e-6 * max(1.0, float(np.max(np.abs(xi))))
        fd = finite_diff_grad(pot.value, xi, h)
        err = relative_error(pot.gradient(xi), fd, floor=1e-3)
        worst = max(worst, float(err.max()))
    assert worst <= tol
    return worst


def test_gaussian_examples():
    pot = gaussian_potential(np.zeros(2))
    assert pot.value(np.zeros(2)) == 0.0
    assert np.array_equal(pot.gradient(np.zeros(2)), np.zeros(2))
    assert pot.value(np.array([3.0, 4.0])) == 12.5
    assert np.array_equal(pot.gradient(np.array([3.0, 4.0])), [3.0, 4.0])
    assert gaussian_potential(np.ones(2)).value(np.ones(2)) == 0.0
    assert pot.nu == 1.0


def test_gaussian_batched():
    pot = gaussian_potential([1.0, -1.0])
    xs = np.arange(6.0).reshape(3, 2)
    assert np.allclose(pot.value(xs), [pot.value(x) for x in xs])
    assert pot.gradient(xs).shape == (3, 2)


def test_gamma_latent_examples():
    pot = gamma_latent_posterior([1.0], 0.0, 1.0)
    assert pot.value(np.zeros(1)) == pytest.approx(math.log(24.0), abs=1e-12)
    expected = -10 * 0.25 * (0.0 - digamma(5.0))
    assert pot.gradient(np.zeros(1))[0] == pytest.approx(expected, rel=1e-12)
    fd = finite_diff_grad(pot.value, np.zeros(1), 1e-6)[0]
    assert pot.gradient(np.zeros(1))[0] == pytest.approx(fd, rel=1e-7)


def test_gamma_latent_is_separable(np_rng):
    x = np_rng.gamma(5.0, size=4)
    z = np_rng.normal(size=4)
    joint = gamma_latent_posterior(x, 1.2, -0.7)
    parts = [gamma_latent_posterior([xi], 1.2, -0.7) for xi in x]
    assert joint.value(z) == pytest.approx(sum(p.value(z[i:i + 1]) for i, p in enumerate(parts)), rel=1e-13)
    assert np.allclose(joint.gradient(z), [p.gradient(z[i:i + 1])[0] for i, p in enumerate(parts)], rtol=1e-13)


def test_gamma_latent_rejects_nonpositive():
    with pytest.raises(ValueError):
        gamma_latent_posterior([1.0, 0.0], 0, 1)


def test_generator_examples():
    ident = Mlp1D.identity_like()
    pot = generator_posterior(0.0, ident, 1.0)
    assert pot.value(np.zeros(1)) == pytest.approx(0.0, abs=1e-12)
    assert pot.gradient(np.zeros(1))[0] == pytest.approx(0.0, abs=1e-12)
    pot = generator_posterior(2.0, ident, 1.0)
    assert pot.value(np.ones(1)) == pytest.approx(1.0, abs=1e-12)
    assert pot.gradient(np.ones(1))[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        generator_posterior(0.0, ident, 0.0)


def test_all_potential_gradients(np_rng, rng):
    fd_check(gaussian_potential(np_rng.normal(size=3)), np_rng.normal(size=(100, 3)) * 3)
    x = np_rng.gamma(4.0, size=5)
    fd_check(gamma_latent_posterior(x, 2.0, 0.5), np_rng.normal(size=(100, 5)) * 2)
    pts = []
    for i in range(100):
        net = Mlp1D.random(8, rng.substream(i))
        pot = generator_posterior(np_rng.normal() * 2, net, 0.5 + np_rng.random())
        fd_check(pot, [np.array([np_rng.normal() * 2])])


def test_step_size_bound_examples():
    c = StabilityConstants(nu=1.0, beta=0.5, alpha=1.0, gamma=1.0)
    assert c.c_beta == 0.1875
    d = 0.1875
    assert step_size_bound(c) == pytest.approx(d + 1 - math.sqrt(d * d + 1), rel=1e-14)
    assert step_size_bound(c) == pytest.approx(0.17007, abs=1e-5)
    c = StabilityConstants(nu=10.0, beta=0.5, alpha=1.0, gamma=1.0)
    assert step_size_bound(c) == pytest.approx(0.0018733, abs=1e-7)


@given(st.floats(0.01, 100), st.floats(0.01, 0.99), st.floats(0.01, 50))
def test_step_size_bound_properties(gamma, beta, nu):
    b1 = step_size_bound(StabilityConstants(nu, beta, 1.0, gamma))
    b2 = step_size_bound(StabilityConstants(nu * 1.5, beta, 1.0, gamma))
    assert 0 < b1 <= 1 / gamma
    assert b2 <= b1 * (1 + 1e-12)


def test_step_size_bound_domain():
    with pytest.raises(ValueError):
        step_size_bound(StabilityConstants(1.0, 1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        step_size_bound(StabilityConstants(0.0, 0.5, 1.0, 1.0))



@pytest.mark.parametrize("d", [1e-12, 1e-3, 0.5, 1.0, 2.0, 1e3, 1e9])
def test_root_gap_matches_mpmath(d):
    from sagd.potentials import _root_gap
    with mpmath.workdps(50):
        D = mpmath.mpf(d)
        exact = float(D + 1 - mpmath.sqrt(D * D + 1))
    assert _root_gap(d) == pytest.approx(exact, rel=1e-14)
