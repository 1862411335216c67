import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm as scipy_expm

from twinsync.model import (DiscreteStateSpace, ModelError, discretize_zoh,
                            simulate)


def scalar_model(a=0.5, b=1.0, c=1.0):
    return DiscreteStateSpace(A=[[a]], B=[[b]], C=[[c]], Ts=0.01)


def test_hand_iteration():
    # x_{k+1} = 0.5 x_k + u_k, y = x, u == 1:  y = 0, 1, 1.5, 1.75
    _, ys = simulate(scalar_model(), [0.0], np.ones(4))
    assert np.allclose(ys[:, 0], [0.0, 1.0, 1.5, 1.75], atol=1e-15)


def test_identity_hold():
    m = DiscreteStateSpace(A=np.eye(2), B=np.zeros((2, 1)), C=np.eye(2), Ts=1.0)
    xs, _ = simulate(m, [1.0, -2.0], np.zeros(10))
    assert np.allclose(xs, np.tile([1.0, -2.0], (10, 1)), atol=0.0)


def test_zero_noise_matrices_ignore_seed():
    m = scalar_model()
    _, quiet = simulate(m, [0.3], np.ones(20))
    _, seeded = simulate(m, [0.3], np.ones(20), noise_seed=5)
    # G defaults to zeros and Q=R=0, so any seed must change nothing
    assert np.array_equal(quiet, seeded)


def test_noise_seed_reproducible():
    m = DiscreteStateSpace(A=[[0.9]], B=[[1.0]], C=[[1.0]], G=[[1.0]],
                           Q=[[0.1]], R=[[0.01]], Ts=0.01)
    _, y1 = simulate(m, [0.0], np.zeros(100), noise_seed=11)
    _, y2 = simulate(m, [0.0], np.zeros(100), noise_seed=11)
    _, y3 = simulate(m, [0.0], np.zeros(100), noise_seed=12)
    assert np.array_equal(y1, y2)
    assert not np.array_equal(y1, y3)


def test_dimension_errors():
    m = scalar_model()
    with pytest.raises(ModelError):
        simulate(m, [0.0, 0.0], np.ones(3))
    with pytest.raises(ModelError):
        simulate(m, [0.0], np.ones((3, 2)))
    with pytest.raises(ModelError):
        simulate(m, [0.0], np.empty(0))
    with pytest.raises(ModelError):
        DiscreteStateSpace(A=np.eye(2), B=np.zeros((3, 1)), C=[[1.0, 0.0]])
    with pytest.raises(ModelError):
        DiscreteStateSpace(A=[[1.0]], B=[[1.0]], C=[[1.0]], Ts=0.0)
    with pytest.raises(ModelError):
        DiscreteStateSpace(A=[[1.0]], B=[[1.0]], C=[[1.0]], Q=[[-1.0]],
                           G=[[1.0]])


def test_zoh_zero_dynamics():
    Ad, Bd = discretize_zoh(np.zeros((2, 2)), [[1.0], [2.0]], 0.5)
    assert np.allclose(Ad, np.eye(2), atol=1e-15)
    assert np.allclose(Bd, [[0.5], [1.0]], atol=1e-15)


def test_zoh_scalar_closed_form():
    for a in (-3.0, -0.2, 0.7, 2.5):
        Ts = 0.13
        Ad, Bd = discretize_zoh([[a]], [[1.0]], Ts)
        assert Ad[0, 0] == pytest.approx(math.exp(a * Ts), rel=1e-12)
        assert Bd[0, 0] == pytest.approx((math.exp(a * Ts) - 1.0) / a, rel=1e-12)


def test_zoh_double_integrator_exact():
    # nilpotent exponential truncates: Ad=[[1,Ts],[0,1]], Bd=[Ts^2/2, Ts]
    Ts = 0.25
    Ad, Bd = discretize_zoh([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], Ts)
    assert np.allclose(Ad, [[1.0, Ts], [0.0, 1.0]], atol=1e-15)
    assert np.allclose(Bd, [[Ts * Ts / 2.0], [Ts]], atol=1e-15)


def test_zoh_semigroup():
    rng = np.random.default_rng(0)
    Ac = rng.normal(size=(3, 3))
    Ad_half, _ = discretize_zoh(Ac, np.zeros((3, 1)), 0.05)
    Ad_full, _ = discretize_zoh(Ac, np.zeros((3, 1)), 0.1)
    assert np.allclose(Ad_half @ Ad_half, Ad_full, rtol=1e-12, atol=1e-14)


def test_zoh_against_scipy():
    rng = np.random.default_rng(3)
    for _ in range(5):
        Ac = rng.normal(size=(4, 4)) * 3.0
        Bc = rng.normal(size=(4, 2))
        Ts = 0.07
        Ad, Bd = discretize_zoh(Ac, Bc, Ts)
        aug = np.zeros((6, 6))
        aug[:4, :4] = Ac * Ts
        aug[:4, 4:] = Bc * Ts
        E = scipy_expm(aug)
        assert np.allclose(Ad, E[:4, :4], rtol=1e-10, atol=1e-12)
        assert np.allclose(Bd, E[:4, 4:], rtol=1e-10, atol=1e-12)


def test_zoh_requires_positive_ts():
    with pytest.raises(ModelError):
        discretize_zoh([[0.0]], [[1.0]], 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_simulate_superposition(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3)) * 0.4
    m = DiscreteStateSpace(A=A, B=rng.normal(size=(3, 1)),
                           C=rng.normal(size=(1, 3)), Ts=0.01)
    x0a, x0b = rng.normal(size=3), rng.normal(size=3)
    ua, ub = rng.normal(size=30), rng.normal(size=30)
    _, ya = simulate(m, x0a, ua)
    _, yb = simulate(m, x0b, ub)
    _, yab = simulate(m, x0a + x0b, ua + ub)
    assert np.allclose(ya + yb, yab, rtol=1e-9, atol=1e-9)
