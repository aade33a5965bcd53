import numpy as np
import pytest
import scipy.sparse as sp

from sparselmi.conic import (NONNEG, PSD, SOC, ZERO, ConeBlock, ConicError,
                             ConicProgram, ProgramBuilder, SolverSettings,
                             check_solution, cone_distance, smat, solve, svec,
                             svec_dim)


def lp_min_x_geq_2() -> ConicProgram:
    # min x s.t. x >= 2  (nonneg slack x - 2)
    b = ProgramBuilder()
    x = b.add_vars(1).start
    b.add_objective(x, 1.0)
    blk = b.add_block(NONNEG, 1)
    blk.add_g(0, x, -1.0)
    blk.add_h(0, -2.0)
    return b.build()


def soc_norm_problem() -> ConicProgram:
    # min t s.t. ||(3,4)||_2 <= t
    b = ProgramBuilder()
    t = b.add_vars(1).start
    b.add_objective(t, 1.0)
    blk = b.add_block(SOC, 3)
    blk.add_g(0, t, -1.0)
    blk.add_h(1, 3.0)
    blk.add_h(2, 4.0)
    return b.build()


def psd_arrow_problem() -> ConicProgram:
    # min x s.t. [[x, 1], [1, x]] >= 0
    b = ProgramBuilder()
    x = b.add_vars(1).start
    b.add_objective(x, 1.0)
    blk = b.add_block(PSD, svec_dim(2), side=2)
    blk.add_g(0, x, -1.0)
    blk.add_g(2, x, -1.0)
    blk.add_h(1, np.sqrt(2.0))
    return b.build()


def test_svec_round_trip(rng):
    m = rng.standard_normal((4, 4))
    m = m + m.T
    v = svec(m)
    assert v.shape == (10,)
    assert np.allclose(smat(v, 4), m)
    m2 = rng.standard_normal((4, 4))
    m2 = m2 + m2.T
    assert np.dot(svec(m), svec(m2)) == pytest.approx(np.trace(m @ m2))


def test_lp_example():
    sol = solve(lp_min_x_geq_2())
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(2.0, abs=1e-7)


def test_soc_example():
    sol = solve(soc_norm_problem())
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(5.0, abs=1e-7)


def test_psd_example():
    sol = solve(psd_arrow_problem())
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-6)


def test_check_solution_feasible_lp():
    prog = lp_min_x_geq_2()
    report = check_solution(prog, np.array([2.0]))
    assert report.max_violation == 0.0
    assert report.objective_value == pytest.approx(2.0)


def test_check_solution_psd_distance():
    prog = psd_arrow_problem()
    report = check_solution(prog, np.array([0.5]))
    assert report.cone_distances[0] == pytest.approx(0.5)


def test_check_solution_perturbed_optimal():
    prog = psd_arrow_problem()
    report = check_solution(prog, np.array([1.0 - 1e-6]))
    assert report.max_violation <= 1e-5


def test_objective_scaling_leaves_argmin():
    prog = psd_arrow_problem()
    scaled = ConicProgram(prog.num_vars, 10.0 * prog.objective, prog.eq_a,
                          prog.eq_b, prog.blocks)
    x1 = solve(prog).x
    x2 = solve(scaled).x
    assert np.max(np.abs(x1 - x2)) <= 1e-6


def test_weak_duality_gap_reported():
    sol = solve(psd_arrow_problem())
    assert sol.duality_gap <= 1e-7
    assert sol.primal_residual <= 1e-8


def test_infeasible_detected():
    # x >= 2 and x <= 1
    b = ProgramBuilder()
    x = b.add_vars(1).start
    b.add_objective(x, 1.0)
    blk = b.add_block(NONNEG, 2)
    blk.add_g(0, x, -1.0)
    blk.add_h(0, -2.0)
    blk.add_g(1, x, 1.0)
    blk.add_h(1, 1.0)
    sol = solve(b.build())
    assert sol.status == "infeasible"


def test_unbounded_detected():
    # min x s.t. x <= 0
    b = ProgramBuilder()
    x = b.add_vars(1).start
    b.add_objective(x, 1.0)
    blk = b.add_block(NONNEG, 1)
    blk.add_g(0, x, 1.0)
    sol = solve(b.build())
    assert sol.status == "unbounded"


def test_zero_cone_folds_to_equality():
    # min x + y s.t. x - y = 1 (zero cone), x >= 0, y >= 0
    b = ProgramBuilder()
    x, y = b.add_vars(2)
    b.add_objective(x, 1.0)
    b.add_objective(y, 1.0)
    z = b.add_block(ZERO, 1)
    z.add_g(0, x, -1.0)
    z.add_g(0, y, 1.0)
    z.add_h(0, -1.0)
    nn = b.add_block(NONNEG, 2)
    nn.add_g(0, x, -1.0)
    nn.add_g(1, y, -1.0)
    sol = solve(b.build())
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.x[1] == pytest.approx(0.0, abs=1e-7)


def test_mixed_cone_program(rng):
    # min c'x with an SOC bound, a PSD bound, and an equality
    b = ProgramBuilder()
    v = b.add_vars(3)
    for idx, c in zip(v, [1.0, 2.0, 0.5]):
        b.add_objective(idx, c)
    b.add_equality([v[0], v[1]], [1.0, 1.0], 1.0)
    s = b.add_block(SOC, 3)
    s.add_g(0, v[2], -1.0)
    s.add_g(1, v[0], -1.0)
    s.add_g(2, v[1], -1.0)
    p = b.add_block(PSD, svec_dim(2), side=2)
    p.add_g(0, v[0], -1.0)
    p.add_g(2, v[1], -1.0)
    p.add_h(1, -0.2 * np.sqrt(2.0))
    sol = solve(b.build())
    assert sol.status == "optimal"
    rep = check_solution(b.build(), sol.x)
    assert rep.max_violation <= 1e-7


def test_block_validation():
    with pytest.raises(ConicError, match="PSD block size"):
        ConeBlock(PSD, 4, sp.csr_matrix((4, 1)), np.zeros(4), side=2)
    with pytest.raises(ConicError, match="cone kind"):
        ConeBlock("weird", 1, sp.csr_matrix((1, 1)), np.zeros(1))


def test_cone_distance_zero_block():
    blk = ConeBlock(ZERO, 2, sp.csr_matrix((2, 1)), np.array([0.5, -0.25]))
    assert cone_distance(blk, blk.h) == pytest.approx(0.5)


def test_solver_settings_tolerance_honored():
    sol = solve(psd_arrow_problem(), SolverSettings(tolerance=1e-10))
    if sol.status == "optimal":
        assert sol.primal_residual <= 1e-10
    else:
        assert sol.status in ("maxIters", "numericalFailure")
