"""Filter recursion checked against a batch trajectory estimate.

For linear-Gaussian models the filtered mean equals the MAP solution of the
whitened least-squares problem over (x0, w_0, ..., w_{T-2}).  That batch
solve shares no code with the recursion, so agreement pins both phases."""
import numpy as np
import pytest

from twinsync.model import DiscreteStateSpace, simulate
from twinsync.observer import (KalmanFilter, ObserverError, estimate_output,
                               measurement_update, time_update)


def batch_map_terminal(a, q, r, p0, m0, ys):
    # z = (x0, w0, ..., w_{T-2});  x_k = a^k x0 + sum_j a^(k-1-j) w_j
    T = len(ys)
    rows = []
    rhs = []
    row = np.zeros(T)
    row[0] = 1.0 / np.sqrt(p0)
    rows.append(row)
    rhs.append(m0 / np.sqrt(p0))
    for j in range(T - 1):
        row = np.zeros(T)
        row[1 + j] = 1.0 / np.sqrt(q)
        rows.append(row)
        rhs.append(0.0)
    for k in range(T):
        coef = np.zeros(T)
        coef[0] = a ** k
        for j in range(k):
            coef[1 + j] = a ** (k - 1 - j)
        rows.append(coef / np.sqrt(r))
        rhs.append(ys[k] / np.sqrt(r))
    z, *_ = np.linalg.lstsq(np.vstack(rows), np.array(rhs), rcond=None)
    return a ** (T - 1) * z[0] + sum(
        a ** (T - 2 - j) * z[1 + j] for j in range(T - 1))


def scalar_model(a=0.9, q=0.3, r=0.5):
    return DiscreteStateSpace(a, 0.0, 1.0, G=1.0, F=1.0, Q=q, R=r, Ts=0.01)


def test_filter_matches_batch_map():
    a, q, r, p0, m0 = 0.9, 0.3, 0.5, 2.0, 0.4
    ys = [1.1, 0.3, 0.7]
    kf = KalmanFilter.init(scalar_model(a, q, r), x0=[m0], p0=p0)
    kf = measurement_update(kf, ys[0])
    for y in ys[1:]:
        kf = time_update(kf, 0.0)
        kf = measurement_update(kf, y)
    want = batch_map_terminal(a, q, r, p0, m0, ys)
    assert kf.x_hat[0] == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_filter_matches_batch_map_longer():
    a, q, r, p0, m0 = 0.7, 0.05, 0.2, 1.5, -0.3
    ys = np.random.default_rng(11).normal(size=8).tolist()
    kf = KalmanFilter.init(scalar_model(a, q, r), x0=[m0], p0=p0)
    kf = measurement_update(kf, ys[0])
    for y in ys[1:]:
        kf = time_update(kf, 0.0)
        kf = measurement_update(kf, y)
    want = batch_map_terminal(a, q, r, p0, m0, ys)
    assert kf.x_hat[0] == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_measurement_update_hand_case():
    # P=2, R=1: K = 2/3, so y=3 pulls x from 0 to 2 and P to 2/3
    m = DiscreteStateSpace(1.0, 0.0, 1.0, G=1.0, F=1.0, Q=0.0, R=1.0)
    kf = measurement_update(KalmanFilter.init(m, p0=2.0), 3.0)
    assert kf.K_last[0, 0] == pytest.approx(2.0 / 3.0, rel=1e-12)
    assert kf.x_hat[0] == pytest.approx(2.0, rel=1e-12)
    assert kf.P[0, 0] == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_time_update_identity_is_noop():
    m = DiscreteStateSpace(np.eye(2), np.zeros((2, 1)), [[1.0, 0.0]],
                           G=np.zeros((2, 1)), Q=[[0.0]], R=[[1.0]])
    kf = KalmanFilter.init(m, x0=[0.3, -0.4], p0=1.7)
    tu = time_update(kf, 0.0)
    assert np.array_equal(tu.x_hat, kf.x_hat)
    assert np.array_equal(tu.P, kf.P)


def test_time_update_covariance_growth():
    m = DiscreteStateSpace(1.0, 0.0, 1.0, G=1.0, Q=1.0, R=1.0)
    tu = time_update(KalmanFilter.init(m, p0=1.0), 0.0)
    assert tu.P[0, 0] == 2.0


def test_time_update_mean_propagation():
    m = DiscreteStateSpace(2.0, 1.0, 1.0, R=1.0)
    tu = time_update(KalmanFilter.init(m, x0=[1.0]), 3.0)
    assert tu.x_hat[0] == 5.0


def test_exact_measurement_overrides_prior():
    # R = 0 makes the measurement exact: the update lands on y
    m = DiscreteStateSpace(1.0, 0.0, 1.0, G=1.0, Q=0.0, R=0.0)
    kf = measurement_update(KalmanFilter.init(m, p0=1.0), 0.8125)
    assert kf.x_hat[0] == 0.8125


def test_zero_innovation_keeps_mean_shrinks_covariance():
    m = scalar_model()
    kf = KalmanFilter.init(m, x0=[0.7], p0=1.0)
    up = measurement_update(kf, 0.7)
    assert up.x_hat[0] == 0.7
    assert up.P[0, 0] < kf.P[0, 0]


def test_estimate_output():
    m = DiscreteStateSpace(np.eye(2), np.zeros((2, 1)), [[2.0, -1.0]],
                           R=[[1.0]])
    kf = KalmanFilter.init(m, x0=[1.0, 3.0])
    assert estimate_output(kf)[0] == pytest.approx(-1.0)


def random_third_order(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    A *= 0.95 / max(abs(np.linalg.eigvals(A)))
    G = rng.normal(size=(3, 1))
    C = rng.normal(size=(1, 3))
    return DiscreteStateSpace(A, np.zeros((3, 1)), C, G=G,
                              Q=[[0.2]], R=[[0.1]])


def test_covariance_stays_symmetric_psd():
    kf = KalmanFilter.init(random_third_order(4), p0=1.0)
    rng = np.random.default_rng(5)
    for _ in range(2000):
        kf = time_update(kf, 0.0)
        kf = measurement_update(kf, rng.normal())
        assert np.array_equal(kf.P, kf.P.T)
        assert np.linalg.eigvalsh(kf.P).min() >= -1e-8


def test_measurement_update_never_grows_trace():
    # P_post = P - K S K', and K S K' is PSD
    kf = KalmanFilter.init(random_third_order(6), p0=2.0)
    rng = np.random.default_rng(7)
    for _ in range(300):
        kf = time_update(kf, 0.0)
        before = np.trace(kf.P)
        kf = measurement_update(kf, rng.normal())
        assert np.trace(kf.P) <= before + 1e-12


def test_innovations_are_white_on_matched_model():
    m = scalar_model()
    n = 10_000
    _, ys = simulate(m, [0.0], np.zeros(n), noise_seed=21)
    kf = KalmanFilter.init(m, p0=1.0)
    innov = np.empty(n)
    for k in range(n):
        innov[k] = ys[k, 0] - estimate_output(kf)[0]
        kf = measurement_update(kf, ys[k])
        kf = time_update(kf, 0.0)
    innov = innov[200:]
    rho1 = np.dot(innov[:-1], innov[1:]) / np.dot(innov, innov)
    assert abs(rho1) < 0.05


def test_singular_innovation_covariance_raises():
    m = DiscreteStateSpace(np.eye(3), np.zeros((3, 1)), np.zeros((1, 3)),
                           R=[[0.0]])
    with pytest.raises(ObserverError, match="singular"):
        measurement_update(KalmanFilter.init(m, p0=1.0), 0.0)


def test_dimension_mismatches():
    kf = KalmanFilter.init(scalar_model(), p0=1.0)
    with pytest.raises(ObserverError, match="input"):
        time_update(kf, [1.0, 2.0])
    with pytest.raises(ObserverError, match="measurement"):
        measurement_update(kf, [1.0, 2.0])
