import numpy as np
import pytest

from sparselmi.model import (CONTINUOUS, DISCRETE, ClosedLoop, NoiseChannel,
                             StochasticSystem)
from sparselmi.msstab import (OracleError, cost_certificate, lqrm_cost,
                              lqrm_policy_iteration, ms_generator, ms_stable)

from conftest import random_system


def scalar_ct(a, sigma=0.0, b=0.0, sigma0=1.0):
    channels = (NoiseChannel(sigma, state_matrix=[[1.0]]),) if sigma else ()
    return StochasticSystem(CONTINUOUS, [[a]], [[b]], channels, [[sigma0]])


def scalar_dt(a, sigma=0.0, b=0.0, sigma0=1.0):
    channels = (NoiseChannel(sigma, state_matrix=[[1.0]]),) if sigma else ()
    return StochasticSystem(DISCRETE, [[a]], [[b]], channels, [[sigma0]])


def test_generator_scalar_continuous():
    cl = ClosedLoop(CONTINUOUS, np.array([[-1.0]]), ((1.0, np.array([[1.0]])),))
    assert ms_generator(cl) == pytest.approx(np.array([[-1.0]]))


def test_generator_scalar_discrete():
    cl = ClosedLoop(DISCRETE, np.array([[0.9]]), ((0.3, np.array([[1.0]])),))
    assert ms_generator(cl) == pytest.approx(np.array([[0.9]]))


def test_generator_kronecker_sum_spectrum():
    cl = ClosedLoop(CONTINUOUS, np.diag([-1.0, -2.0]), ())
    eig = np.sort(np.linalg.eigvals(ms_generator(cl)).real)
    assert np.allclose(eig, [-4.0, -3.0, -3.0, -2.0])


def test_ms_stable_scalar_stable():
    rep = ms_stable(scalar_ct(-1.0, sigma=1.0))
    assert rep.stable and rep.margin == pytest.approx(1.0) and rep.lifted_dimension == 1


def test_ms_stable_scalar_unstable():
    rep = ms_stable(scalar_ct(-1.0, sigma=1.5))
    assert not rep.stable and rep.margin == pytest.approx(-0.25)


def test_ms_stable_scalar_discrete():
    rep = ms_stable(scalar_dt(0.9, sigma=0.3))
    assert rep.stable and rep.margin == pytest.approx(0.1)


def test_ms_stable_similarity_invariance(rng):
    for _ in range(10):
        sys = random_system(rng, CONTINUOUS, n=3, m=2)
        k = 0.1 * rng.standard_normal((2, 3))
        t = rng.standard_normal((3, 3)) + 2 * np.eye(3)
        tinv = np.linalg.inv(t)
        channels = tuple(
            NoiseChannel(ch.intensity,
                         None if ch.state_matrix is None else t @ ch.state_matrix @ tinv,
                         None if ch.input_matrix is None else t @ ch.input_matrix)
            for ch in sys.channels)
        sys_t = StochasticSystem(CONTINUOUS, t @ sys.a0 @ tinv, t @ sys.b0,
                                 channels, t @ sys.sigma0 @ t.T)
        assert ms_stable(sys, k).stable == ms_stable(sys_t, k @ tinv).stable


def test_lqrm_cost_scalar_closed_forms():
    q = np.array([[1.0]])
    r = np.array([[1.0]])
    k = np.zeros((1, 1))
    assert lqrm_cost(scalar_ct(-1.0), k, q, r) == pytest.approx(0.5)
    assert lqrm_cost(scalar_ct(-1.0, sigma=1.0), k, q, r) == pytest.approx(1.0)
    assert lqrm_cost(scalar_ct(0.5), k, q, r) == np.inf


def test_lqrm_cost_nonnegative(rng):
    q = r = None
    found = 0
    while found < 10:
        sys = random_system(rng, CONTINUOUS, n=3, m=1)
        if not ms_stable(sys).stable:
            continue
        found += 1
        q = np.eye(3)
        r = np.eye(1)
        cost = lqrm_cost(sys, np.zeros((1, 3)), q, r)
        assert cost >= 0.0
    zero_s0 = StochasticSystem(CONTINUOUS, [[-1.0]], [[0.0]], (), [[0.0]])
    assert lqrm_cost(zero_s0, np.zeros((1, 1)), np.eye(1), np.eye(1)) == 0.0


def test_lqrm_cost_rejects_indefinite_weights():
    with pytest.raises(OracleError, match="positive definite"):
        lqrm_cost(scalar_ct(-1.0), np.zeros((1, 1)), np.array([[-1.0]]),
                  np.eye(1))


def test_cost_certificate_marginally_stable():
    # margin is exactly zero: lifted solve is singular
    sys = scalar_ct(0.0)
    with pytest.raises(OracleError, match="marginal"):
        cost_certificate(sys, np.zeros((1, 1)), np.eye(1), np.eye(1))


def test_policy_iteration_scalar_integrator():
    sys = scalar_ct(0.0, b=1.0)
    k, j = lqrm_policy_iteration(sys, np.eye(1), np.eye(1), np.array([[-0.5]]))
    assert k == pytest.approx(np.array([[-1.0]]), abs=1e-8)
    assert j == pytest.approx(1.0, abs=1e-8)


def test_policy_iteration_scalar_unstable_plant():
    sys = scalar_ct(1.0, b=1.0)
    k, j = lqrm_policy_iteration(sys, np.eye(1), np.eye(1), np.array([[-3.0]]))
    assert k == pytest.approx(np.array([[-(1 + np.sqrt(2))]]), abs=1e-8)
    assert j == pytest.approx(1 + np.sqrt(2), abs=1e-8)


def test_policy_iteration_weight_homogeneity():
    sys = scalar_ct(1.0, b=1.0)
    k1, j1 = lqrm_policy_iteration(sys, np.eye(1), np.eye(1), np.array([[-3.0]]))
    k2, j2 = lqrm_policy_iteration(sys, 7 * np.eye(1), 7 * np.eye(1),
                                   np.array([[-3.0]]))
    assert k2 == pytest.approx(k1, abs=1e-8)
    assert j2 == pytest.approx(7 * j1, rel=1e-8)


def test_policy_iteration_rejects_nonstabilizing_start():
    with pytest.raises(OracleError, match="stabilizing"):
        lqrm_policy_iteration(scalar_ct(1.0, b=1.0), np.eye(1), np.eye(1),
                              np.array([[0.0]]))


def test_policy_iteration_local_optimality(rng):
    sys = StochasticSystem(
        CONTINUOUS, [[0.4, 1.0], [0.0, -0.2]], [[0.0], [1.0]],
        (NoiseChannel(0.3, state_matrix=np.eye(2)),), np.eye(2))
    q, r = np.eye(2), np.eye(1)
    k0 = np.array([[-2.0, -3.0]])
    kstar, jstar = lqrm_policy_iteration(sys, q, r, k0)
    tried = 0
    while tried < 20:
        k = kstar + 0.2 * rng.standard_normal(kstar.shape)
        cost = lqrm_cost(sys, k, q, r)
        if not np.isfinite(cost):
            continue
        tried += 1
        assert cost >= jstar - 1e-9 * (1.0 + abs(jstar))


def test_policy_iteration_discrete_matches_riccati():
    # classical scalar discrete LQR: a=0.5, b=1, q=r=1
    sys = scalar_dt(0.5, b=1.0)
    k, j = lqrm_policy_iteration(sys, np.eye(1), np.eye(1), np.array([[-0.4]]))
    x = (0.25 + np.sqrt(0.0625 + 4)) / 2
    k_exact = -(0.5 * x) / (1 + x)
    assert k == pytest.approx(np.array([[k_exact]]), abs=1e-8)
    assert j == pytest.approx(x, abs=1e-8)


def test_policy_iteration_coupled_channel_improves(rng):
    ch = NoiseChannel(0.4, state_matrix=[[0.5, 0.0], [0.0, 0.0]],
                      input_matrix=[[0.2], [0.1]])
    sys = StochasticSystem(CONTINUOUS, [[0.3, 1.0], [0.0, 0.1]],
                           [[0.0], [1.0]], (ch,), np.eye(2))
    q, r = np.eye(2), np.eye(1)
    k0 = np.array([[-2.0, -3.0]])
    assert ms_stable(sys, k0).stable
    kstar, jstar = lqrm_policy_iteration(sys, q, r, k0)
    assert jstar <= lqrm_cost(sys, k0, q, r) + 1e-12
    for _ in range(5):
        k = kstar + 0.1 * rng.standard_normal(kstar.shape)
        cost = lqrm_cost(sys, k, q, r)
        if np.isfinite(cost):
            assert cost >= jstar - 1e-9 * (1 + abs(jstar))
