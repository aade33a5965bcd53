import numpy as np
import pytest

from sparselmi.design import (DesignError, DesignInfeasibleError,
                              DesignOptions, design_output_feedback,
                              design_state_feedback, reconstruct_gain,
                              sweep_gamma, threshold_pattern)
from sparselmi.lmi import RegularizerSpec
from sparselmi.model import CONTINUOUS, DISCRETE, NoiseChannel, StochasticSystem
from sparselmi.msstab import ms_stable

from conftest import random_system


def test_threshold_zero_matrix():
    rows, cols = threshold_pattern(np.zeros((2, 3)), 1e-3)
    assert rows == () and cols == ()


def test_threshold_relative():
    y = np.array([[1.0, 0.0], [1e-9, 0.0]])
    rows, cols = threshold_pattern(y, 1e-3)
    assert rows == (0,) and cols == (0,)


def test_threshold_tau_zero_keeps_any_nonzero():
    y = np.array([[1.0, 0.0], [1e-12, 0.0]])
    rows, cols = threshold_pattern(y, 0.0)
    assert rows == (0, 1) and cols == (0,)


def test_reconstruct_identity_p():
    y = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(reconstruct_gain(y, np.eye(2)), y)


def test_reconstruct_scaled_p():
    y = np.array([[1.0, 2.0]])
    assert np.allclose(reconstruct_gain(y, 2 * np.eye(2)), y / 2)


def test_reconstruct_preserves_zero_rows(rng):
    y = rng.standard_normal((3, 4))
    y[1, :] = 0.0
    root = rng.standard_normal((4, 4))
    p = root @ root.T + np.eye(4)
    k = reconstruct_gain(y, p)
    assert np.all(k[1, :] == 0.0)


def test_reconstruct_rejects_indefinite():
    with pytest.raises(DesignError, match="positive definite"):
        reconstruct_gain(np.ones((1, 2)), np.diag([1.0, -1.0]))


def test_state_feedback_scalar_riccati():
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[1.0]], (), [[1.0]])
    res = design_state_feedback(sys, np.eye(1), np.eye(1))
    assert res.gain[0, 0] == pytest.approx(-(1 + np.sqrt(2)), abs=1e-3)
    assert res.kappa == pytest.approx(1 + np.sqrt(2), abs=1e-3)
    assert res.oracle.stable
    assert res.oracle_cost <= res.kappa + 1e-6 * (1 + abs(res.kappa))


def test_state_feedback_sparsifies_stable_state():
    sys = StochasticSystem(CONTINUOUS, np.diag([-1.0, 1.0]), np.eye(2),
                           (), np.eye(2))
    res = design_state_feedback(sys, np.eye(2), np.eye(2),
                                RegularizerSpec("row_norm", 50.0))
    assert res.row_support == (1,)
    assert res.oracle.stable
    assert np.all(res.gain[0, :] == 0.0)  # truncated row is exactly zero


def test_state_feedback_noise_aware():
    ch = NoiseChannel(1.7, state_matrix=[[1.0]])
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[1.0]], (ch,), [[1.0]])
    res = design_state_feedback(sys, np.eye(1), np.eye(1))
    assert res.oracle.stable
    k_ignorant = np.array([[-(1 + np.sqrt(2))]])
    assert not ms_stable(sys, k_ignorant).stable


def test_state_feedback_rejects_col_spec():
    sys = StochasticSystem(CONTINUOUS, [[0.0]], [[1.0]], (), [[1.0]])
    with pytest.raises(DesignError, match="row-oriented"):
        design_state_feedback(sys, np.eye(1), np.eye(1),
                              RegularizerSpec("col_norm", 1.0))


def test_state_feedback_infeasible():
    # sigma too large: 2(a+k) + sigma^2 k-free term cannot go negative
    ch = NoiseChannel(2.0, state_matrix=[[1.0]])
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[0.0]], (ch,), [[1.0]])
    with pytest.raises(DesignInfeasibleError):
        design_state_feedback(sys)


def test_pure_stabilization_without_weights():
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[1.0]], (), [[1.0]])
    res = design_state_feedback(sys, spec=RegularizerSpec("row_norm", 1.0))
    assert res.kappa is None and res.oracle_cost is None
    assert res.oracle.stable


def test_output_feedback_degenerate_reduces_to_state_feedback(rng):
    sys = StochasticSystem(
        CONTINUOUS, np.array([[0.2, 1.0], [0.0, -0.5]]),
        np.array([[0.0], [1.0]]), (), np.eye(2))
    # tau = 0 keeps every (numerically nonzero) column: the zero-column set
    # is empty and the procedure degenerates to state feedback
    res = design_output_feedback(sys, np.eye(2), np.eye(1),
                                 RegularizerSpec("col_norm", 0.0),
                                 RegularizerSpec("row_norm", 0.0),
                                 DesignOptions(tau=0.0))
    # no zero columns found: C is all of P^{-1} and K is all of Y
    assert res.output_map.shape == (2, 2)
    assert np.allclose(res.gain, res.y, atol=1e-12)
    k_full = reconstruct_gain(res.y, res.p)
    assert np.max(np.abs(res.gain @ res.output_map - k_full)) <= 1e-8


def test_output_feedback_identity_and_oracle(rng):
    done = 0
    while done < 5:
        sys = random_system(rng, CONTINUOUS, n=3, m=2)
        try:
            res = design_output_feedback(sys, np.eye(3), np.eye(2),
                                         RegularizerSpec("col_norm", 1.0),
                                         RegularizerSpec("row_norm", 0.2))
        except DesignError:
            continue
        done += 1
        assert res.oracle.stable
        applied = res.gain @ res.output_map
        assert ms_stable(sys, applied).stable
        if res.truncated:
            kept = list(res.row_support)
        else:
            kept = list(range(sys.m))
        k_full = reconstruct_gain(res.y, res.p)
        gap = np.max(np.abs((applied - k_full)[kept, :])) if kept else 0.0
        assert gap <= 1e-8 * max(1.0, np.max(np.abs(k_full)))


def test_sweep_single_point():
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[1.0]], (), [[1.0]])
    rows = sweep_gamma(sys, np.eye(1), np.eye(1),
                       RegularizerSpec("row_norm", 0.0), [0.0])
    assert len(rows) == 1
    assert rows[0].rel_cost == pytest.approx(0.0)
    assert rows[0].row_support_size == 1


def test_sweep_stability_binds_row():
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[1.0]], (), [[1.0]])
    rows = sweep_gamma(sys, np.eye(1), np.eye(1),
                       RegularizerSpec("row_norm", 0.0), [0.0, 1e6])
    assert rows[1].error is None
    assert rows[1].row_support_size == 1  # the only actuator cannot drop


def test_sweep_support_shrinks():
    sys = StochasticSystem(CONTINUOUS, np.diag([-1.0, 1.0]), np.eye(2),
                           (), np.eye(2))
    rows = sweep_gamma(sys, np.eye(2), np.eye(2),
                       RegularizerSpec("row_norm", 0.0), [0.0, 50.0])
    assert rows[0].row_support_size == 2
    assert rows[1].row_support_size == 1


def test_sweep_records_errors_without_aborting():
    ch = NoiseChannel(2.0, state_matrix=[[1.0]])
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[0.0]], (ch,), [[1.0]])
    rows = sweep_gamma(sys, np.eye(1), np.eye(1),
                       RegularizerSpec("row_norm", 0.0), [0.0, 1.0])
    assert all(r.error is not None for r in rows)


def test_sweep_validates_grid():
    sys = StochasticSystem(CONTINUOUS, [[0.0]], [[1.0]], (), [[1.0]])
    with pytest.raises(DesignError, match="sorted"):
        sweep_gamma(sys, np.eye(1), np.eye(1),
                    RegularizerSpec("row_norm", 0.0), [1.0, 0.5])


def test_sweep_parallel_matches_serial():
    sys = StochasticSystem(CONTINUOUS, np.diag([-1.0, 1.0]), np.eye(2),
                           (), np.eye(2))
    grid = [0.0, 1.0, 5.0]
    serial = sweep_gamma(sys, np.eye(2), np.eye(2),
                         RegularizerSpec("row_norm", 0.0), grid, jobs=1)
    parallel = sweep_gamma(sys, np.eye(2), np.eye(2),
                           RegularizerSpec("row_norm", 0.0), grid, jobs=2)
    for a, b in zip(serial, parallel):
        assert a.kappa == pytest.approx(b.kappa, rel=1e-9)
        assert a.row_support_size == b.row_support_size


def test_every_result_is_verified(rng):
    # every returned DesignResult passes the oracle, over a random batch
    done = 0
    while done < 25:
        domain = CONTINUOUS if rng.integers(2) else DISCRETE
        sys = random_system(rng, domain)
        try:
            res = design_state_feedback(sys, np.eye(sys.n), np.eye(sys.m))
        except DesignError:
            continue
        done += 1
        assert res.oracle.stable and res.oracle.margin > 0
        assert res.oracle_cost <= res.kappa + 1e-6 * (1 + abs(res.kappa))


def test_result_json_round_trip(tmp_path):
    sys = StochasticSystem(CONTINUOUS, [[1.0]], [[1.0]], (), [[1.0]])
    res = design_state_feedback(sys, np.eye(1), np.eye(1))
    path = tmp_path / "design.json"
    res.save_json(path, extra={"config": {"seed": 0}})
    import json

    data = json.loads(path.read_text())
    assert data["oracle"]["stable"] is True
    assert data["config"] == {"seed": 0}
    assert np.allclose(np.array(data["gain"]), res.gain)
