"""Exact mean-square stability and cost oracle via second-moment lifting.

Everything here works on the lifted linear dynamics of vec(E[x x^T]) and
never touches the SDP machinery, so it can independently certify gains
produced elsewhere. Dense solves cap the practical size around n <= 70.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CONTINUOUS, DISCRETE, ClosedLoop, StochasticSystem, close_loop, validate
from .numerics import NumericsError, solve_linear, sym

# Stability calls margins above this relative level decisive; below it the
# verdict drowns in eigenvalue noise at the n^2 lift dimension.
STABILITY_RTOL = 1e-9


class OracleError(RuntimeError):
    """Raised when the oracle cannot produce a trustworthy verdict."""


@dataclass(frozen=True)
class MsReport:
    """Mean-square stability verdict.

    margin is -max Re(lambda) of the lifted generator (continuous) or
    1 - spectral_radius of the lifted transition (discrete); positive
    means stable.
    """

    stable: bool
    margin: float
    lifted_dimension: int


def ms_generator(cl: ClosedLoop) -> np.ndarray:
    """Lifted second-moment dynamics matrix of a closed loop.

    Continuous: G = I(x)F + F(x)I + sum c_i^2 (D_i (x) D_i), so that
    d/dt vec(S) = G vec(S) for S = E[x x^T]. Discrete:
    T = F(x)F + sum c_i^2 (D_i (x) D_i) with vec(S+) = T vec(S).
    """
    f = cl.drift
    n = f.shape[0]
    eye = np.eye(n)
    if cl.time_domain == CONTINUOUS:
        lifted = np.kron(eye, f) + np.kron(f, eye)
    elif cl.time_domain == DISCRETE:
        lifted = np.kron(f, f)
    else:
        raise OracleError(f"unknown time domain {cl.time_domain!r}")
    for c, d in cl.diffusion:
        if c != 0.0:
            lifted = lifted + (c * c) * np.kron(d, d)
    return lifted


def ms_stable(sys: StochasticSystem, gain: np.ndarray | None = None) -> MsReport:
    """Mean-square stability of the closed loop under u = K x (K = 0 if absent)."""
    validate(sys)
    if gain is None:
        gain = np.zeros((sys.m, sys.n))
    cl = close_loop(sys, gain)
    lifted = ms_generator(cl)
    eigs = np.linalg.eigvals(lifted)
    scale = max(1.0, float(np.linalg.norm(lifted, np.inf))) if lifted.size else 1.0
    if sys.time_domain == CONTINUOUS:
        margin = -float(np.max(eigs.real))
    else:
        margin = 1.0 - float(np.max(np.abs(eigs)))
    return MsReport(stable=margin > STABILITY_RTOL * scale, margin=margin,
                    lifted_dimension=sys.n * sys.n)


def _cost_lyapunov_rhs(sys: StochasticSystem, gain: np.ndarray, q: np.ndarray,
                       r: np.ndarray) -> np.ndarray:
    return sym(q + gain.T @ r @ gain)


def _check_cost_weights(sys: StochasticSystem, q: np.ndarray, r: np.ndarray) -> None:
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    if q.shape != (sys.n, sys.n) or r.shape != (sys.m, sys.m):
        raise OracleError(f"Q must be {sys.n}x{sys.n} and R {sys.m}x{sys.m}")
    for name, w in (("Q", q), ("R", r)):
        eigs = np.linalg.eigvalsh(sym(w))
        if w.size and eigs[0] <= 0.0:
            raise OracleError(f"{name} must be positive definite (lambda_min = {eigs[0]:.3e})")


def cost_certificate(sys: StochasticSystem, gain: np.ndarray, q: np.ndarray,
                     r: np.ndarray) -> np.ndarray:
    """Solve the generalized Lyapunov equation for the closed-loop cost matrix X.

    Continuous: F^T X + X F + sum c^2 D^T X D + Q + K^T R K = 0.
    Discrete:   F^T X F + sum c^2 D^T X D - X + Q + K^T R K = 0.
    Requires a mean-square stable closed loop.
    """
    cl = close_loop(sys, gain)
    lifted = ms_generator(cl)
    n = sys.n
    rhs = _cost_lyapunov_rhs(sys, np.asarray(gain, float), np.asarray(q, float),
                             np.asarray(r, float))
    if sys.time_domain == CONTINUOUS:
        op = lifted.T
    else:
        op = lifted.T - np.eye(n * n)
    try:
        vec_x = solve_linear(op, -rhs.reshape(-1, order="F"))
    except NumericsError as exc:
        raise OracleError(f"marginally stable: lifted cost system is singular ({exc})") from exc
    return sym(vec_x.reshape((n, n), order="F"))


def lqrm_cost(sys: StochasticSystem, gain: np.ndarray, q: np.ndarray, r: np.ndarray) -> float:
    """Closed-loop quadratic cost Tr(Sigma0 X); +inf when not mean-square stable."""
    validate(sys)
    _check_cost_weights(sys, q, r)
    gain = np.asarray(gain, dtype=float)
    report = ms_stable(sys, gain)
    if not report.stable:
        return float("inf")
    x = cost_certificate(sys, gain, q, r)
    return float(np.trace(sys.sigma0 @ x))


def _improvement_terms(sys: StochasticSystem, x: np.ndarray):
    """Accumulate sum c^2 B_i^T X B_i and the cross term sum c^2 B_i^T X A_i."""
    quad = np.zeros((sys.m, sys.m))
    cross = np.zeros((sys.m, sys.n))
    for ch in sys.channels:
        if ch.input_matrix is None or ch.intensity == 0.0:
            continue
        c2 = ch.intensity ** 2
        bx = ch.input_matrix.T @ x
        quad += c2 * (bx @ ch.input_matrix)
        if ch.state_matrix is not None:
            cross += c2 * (bx @ ch.state_matrix)
    return quad, cross


def lqrm_policy_iteration(
    sys: StochasticSystem,
    q: np.ndarray,
    r: np.ndarray,
    gain0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iters: int = 200,
) -> tuple[np.ndarray, float]:
    """Optimal gain and cost by policy iteration from a stabilizing start.

    Alternates the generalized Lyapunov evaluation with the greedy update

        continuous: K <- -(R + sum c^2 B_i^T X B_i)^-1 (B0^T X + cross)
        discrete:   K <- -(R + B0^T X B0 + sum c^2 B_i^T X B_i)^-1
                         (B0^T X A0 + cross)

    where coupled channels contribute their cross terms c^2 B_i^T X A_i.
    The cost sequence is checked to be non-increasing at each step.
    """
    validate(sys)
    _check_cost_weights(sys, q, r)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    if gain0 is None:
        # Bootstrapped from the unregularized SDP when the caller has no gain.
        from .design import design_state_feedback
        from .lmi import RegularizerSpec

        gain0 = design_state_feedback(sys, q, r, RegularizerSpec.none()).gain
    gain = np.asarray(gain0, dtype=float)
    if not ms_stable(sys, gain).stable:
        raise OracleError("initial gain is not mean-square stabilizing")

    prev_cost = np.inf
    for _ in range(max_iters):
        x = cost_certificate(sys, gain, q, r)
        cost = float(np.trace(sys.sigma0 @ x))
        if cost > prev_cost + 1e-9 * (1.0 + abs(prev_cost)):
            raise OracleError(
                f"policy iteration cost increased ({prev_cost:.12g} -> {cost:.12g})"
            )
        prev_cost = cost
        quad, cross = _improvement_terms(sys, x)
        if sys.time_domain == CONTINUOUS:
            lhs = r + quad
            rhs = sys.b0.T @ x + cross
        else:
            lhs = r + sys.b0.T @ x @ sys.b0 + quad
            rhs = sys.b0.T @ x @ sys.a0 + cross
        new_gain = -solve_linear(sym(lhs), rhs)
        if not ms_stable(sys, new_gain).stable:
            raise OracleError("policy iteration lost mean-square stability; "
                              "system may not be stabilizable from this start")
        delta = float(np.max(np.abs(new_gain - gain))) if gain.size else 0.0
        gain = new_gain
        if delta <= tol:
            break
    x = cost_certificate(sys, gain, q, r)
    return gain, float(np.trace(sys.sigma0 @ x))
