"""High-level synthesis: sparse state feedback, two-phase output feedback,
gamma sweeps, support thresholding, and gain reconstruction.

Every returned result has been re-verified against the second-moment
oracle; an unverifiable gain raises instead of being returned. For cost
designs, ``oracle_cost`` is the exact closed-loop cost of the raw gain
K = Y P^{-1} and is checked against the certified bound kappa.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .lmi import (LmiHandle, RegularizerSpec, add_regularizer,
                  add_zero_column_constraints, build_lqrm_sdp_ct,
                  build_lqrm_sdp_dt, build_stability_lmi_ct,
                  build_stability_lmi_dt)
from .model import CONTINUOUS, StochasticSystem, validate
from .msstab import MsReport, lqrm_cost, ms_stable
from .numerics import NumericsError, pd_inverse, pd_solve, sym

_TINY = 1e-300


class DesignError(RuntimeError):
    """Raised when synthesis fails or verification rejects a gain."""


class DesignInfeasibleError(DesignError):
    """The stability/cost LMI admits no solution at the requested eps."""


class DesignNumericalError(DesignError):
    """The conic solver could not certify a solution numerically."""


@dataclass
class DesignOptions:
    eps: float | None = None          # strictness shift; None = problem default
    tau: float = 1e-3                 # relative support threshold
    tolerance: float = 1e-8           # conic solver tolerance
    max_iters: int = 50_000
    verbose: bool = False


@dataclass
class DesignResult:
    """One synthesized controller with its certificates.

    gain is the operative feedback (truncated to the detected support
    when that truncation is oracle-stable, raw otherwise); output_map C
    is present for output-feedback designs, where the applied control is
    u = gain * C * x.
    """

    gain: np.ndarray
    p: np.ndarray
    y: np.ndarray
    gamma: float
    regularizer: RegularizerSpec
    row_support: tuple[int, ...]
    col_support: tuple[int, ...]
    oracle: MsReport
    output_map: np.ndarray | None = None
    kappa: float | None = None
    oracle_cost: float | None = None
    truncated: bool = True
    notes: tuple[str, ...] = ()
    solver_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gain": self.gain.tolist(),
            "output_map": None if self.output_map is None else self.output_map.tolist(),
            "P": self.p.tolist(),
            "Y": self.y.tolist(),
            "kappa": self.kappa,
            "gamma": self.gamma,
            "regularizer": {"kind": self.regularizer.kind,
                            "gamma": self.regularizer.gamma,
                            "mu": self.regularizer.mu},
            "row_support": list(self.row_support),
            "col_support": list(self.col_support),
            "oracle": {"stable": self.oracle.stable, "margin": self.oracle.margin,
                       "lifted_dimension": self.oracle.lifted_dimension},
            "oracle_cost": self.oracle_cost,
            "truncated": self.truncated,
            "notes": list(self.notes),
            "solver_stats": self.solver_stats,
        }

    def save_json(self, path, extra: dict | None = None) -> None:
        payload = self.to_dict()
        if extra:
            payload.update(extra)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def threshold_pattern(y: np.ndarray, tau: float) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Rows/cols whose peak magnitude exceeds tau * (global peak + tiny)."""
    if tau < 0:
        raise DesignError("tau must be nonnegative")
    y = np.asarray(y, dtype=float)
    cut = tau * (float(np.max(np.abs(y), initial=0.0)) + _TINY)
    rows = tuple(int(i) for i in range(y.shape[0]) if np.max(np.abs(y[i, :]), initial=0.0) > cut)
    cols = tuple(int(j) for j in range(y.shape[1]) if np.max(np.abs(y[:, j]), initial=0.0) > cut)
    return rows, cols


def reconstruct_gain(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    """K = Y P^{-1} via PD solve; exactly-zero rows of Y stay exactly zero."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    eigs = np.linalg.eigvalsh(sym(p))
    if eigs[0] <= 1e-10 * max(eigs[-1], 1e-300):
        raise DesignError(f"P is not safely positive definite "
                          f"(lambda_min = {eigs[0]:.3e}, lambda_max = {eigs[-1]:.3e})")
    k = pd_solve(sym(p), y.T).T
    zero_rows = ~np.any(y != 0.0, axis=1)
    k[zero_rows, :] = 0.0
    return k


def _build_handle(sys: StochasticSystem, q, r, eps) -> LmiHandle:
    if (q is None) != (r is None):
        raise DesignError("Q and R must be given together or both omitted")
    if sys.time_domain == CONTINUOUS:
        if q is None:
            return build_stability_lmi_ct(sys, eps)
        return build_lqrm_sdp_ct(sys, q, r, eps)
    if q is None:
        return build_stability_lmi_dt(sys, eps)
    return build_lqrm_sdp_dt(sys, q, r, eps)


def _solve_handle(handle: LmiHandle, opts: DesignOptions) -> tuple[dict, conic.ConicSolution]:
    program = handle.program()
    settings = conic.SolverSettings(tolerance=opts.tolerance,
                                    max_iters=opts.max_iters,
                                    verbose=opts.verbose)
    sol = conic.solve(program, settings)
    if sol.status == "infeasible":
        raise DesignInfeasibleError(
            f"not stabilizable at this eps ({handle.eps:.3e}): "
            "the stability LMI is infeasible")
    if sol.status == "unbounded":
        raise DesignError("design problem is unbounded; check Q, R, and Sigma0")
    if sol.status != "optimal":
        raise DesignNumericalError(
            f"conic solver failed ({sol.status}): {sol.message}")
    return handle.extract(sol.x), sol


def _truncate(gain: np.ndarray, rows, cols) -> np.ndarray:
    out = np.zeros_like(gain)
    keep_r = np.asarray(rows, dtype=int)
    keep_c = np.asarray(cols, dtype=int)
    if keep_r.size and keep_c.size:
        out[np.ix_(keep_r, keep_c)] = gain[np.ix_(keep_r, keep_c)]
    return out


def _stats(sol: conic.ConicSolution, handle: LmiHandle) -> dict:
    return {"iterations": sol.iterations, "runtime_s": sol.solve_seconds,
            "primal_residual": sol.primal_residual,
            "dual_residual": sol.dual_residual,
            "duality_gap": sol.duality_gap,
            "psd_block_sides": list(handle.psd_block_sides),
            "eps": handle.eps}


def design_state_feedback(sys: StochasticSystem, q=None, r=None,
                          spec: RegularizerSpec | None = None,
                          opts: DesignOptions | None = None) -> DesignResult:
    """Sparse state feedback by the regularized stability/cost SDP.

    With Q, R present the cost-bound SDP is solved and the result carries
    kappa plus the oracle's exact cost; otherwise the bare stabilization
    problem is solved with the regularizer as the whole objective.
    """
    validate(sys)
    spec = spec or RegularizerSpec.none()
    opts = opts or DesignOptions()
    if spec.col_oriented:
        raise DesignError("state-feedback design expects a row-oriented or "
                          f"'none' regularizer, got {spec.kind}")
    handle = add_regularizer(_build_handle(sys, q, r, opts.eps), spec)
    values, sol = _solve_handle(handle, opts)
    p_mat, y_mat = values["P"], values["Y"]
    kappa = values.get("kappa")
    raw_gain = reconstruct_gain(y_mat, p_mat)
    rows, cols = threshold_pattern(y_mat, opts.tau)

    notes = []
    gain = _truncate(raw_gain, rows, range(sys.n))
    truncated = True
    report = ms_stable(sys, gain)
    if not report.stable and not np.array_equal(gain, raw_gain):
        dropped = sorted(set(range(sys.m)) - set(rows))
        notes.append(f"rows {dropped} not removable at tau={opts.tau:g}; "
                     "returning the un-truncated gain")
        gain = raw_gain
        truncated = False
        report = ms_stable(sys, gain)
    if not report.stable:
        raise DesignError(
            f"oracle verification failed: solver claimed feasibility but the "
            f"closed loop has margin {report.margin:.3e} "
            f"(primal residual {sol.primal_residual:.2e}, gap {sol.duality_gap:.2e})")

    oracle_cost = None
    if q is not None:
        oracle_cost = lqrm_cost(sys, raw_gain, q, r)
        bound = kappa + 1e-6 * (1.0 + abs(kappa))
        if not oracle_cost <= bound:
            raise DesignError(
                f"cost certificate violated: oracle cost {oracle_cost:.12g} exceeds "
                f"kappa bound {kappa:.12g} (solver residuals: primal "
                f"{sol.primal_residual:.2e}, dual {sol.dual_residual:.2e})")

    return DesignResult(gain=gain, p=p_mat, y=y_mat, gamma=spec.gamma,
                        regularizer=spec, row_support=rows, col_support=cols,
                        oracle=report, kappa=kappa, oracle_cost=oracle_cost,
                        truncated=truncated, notes=tuple(notes),
                        solver_stats=_stats(sol, handle))


def design_output_feedback(sys: StochasticSystem, q=None, r=None,
                           col_spec: RegularizerSpec | None = None,
                           row_spec: RegularizerSpec | None = None,
                           opts: DesignOptions | None = None) -> DesignResult:
    """Two-phase output-feedback synthesis.

    Phase 1 promotes column sparsity of Y; the zero columns select which
    state components the output needs. Phase 2 re-solves with those
    columns pinned to zero and a row regularizer to drop controllers.
    Returns K (columns of the phase-2 Y on the surviving output
    coordinates) and C (matching rows of P^{-1}), with u = K C x.
    """
    validate(sys)
    opts = opts or DesignOptions()
    col_spec = col_spec or RegularizerSpec("col_norm", 1.0)
    row_spec = row_spec or RegularizerSpec("row_norm", 1.0)
    if not col_spec.col_oriented:
        raise DesignError(f"phase 1 needs a column-oriented regularizer, got {col_spec.kind}")
    if not row_spec.row_oriented:
        raise DesignError(f"phase 2 needs a row-oriented regularizer, got {row_spec.kind}")

    handle1 = add_regularizer(_build_handle(sys, q, r, opts.eps), col_spec)
    values1, _ = _solve_handle(handle1, opts)
    _, col_support = threshold_pattern(values1["Y"], opts.tau)
    zero_cols = sorted(set(range(sys.n)) - set(col_support))

    handle2 = add_regularizer(_build_handle(sys, q, r, opts.eps), row_spec)
    handle2 = add_zero_column_constraints(handle2, zero_cols)
    try:
        values2, sol2 = _solve_handle(handle2, opts)
    except DesignError as exc:
        raise DesignError(
            f"phase 2 failed under the zero-column pattern {zero_cols}: {exc}; "
            "consider a smaller phase-1 gamma") from exc

    p2, y2 = values2["P"], values2["Y"]
    kappa = values2.get("kappa")
    k_full = reconstruct_gain(y2, p2)
    rows, cols2 = threshold_pattern(y2, opts.tau)
    kept_cols = np.array(sorted(col_support), dtype=int)
    try:
        p2_inv = pd_inverse(sym(p2))
    except NumericsError as exc:
        raise DesignError(f"phase-2 P is numerically singular: {exc}") from exc

    c_map = p2_inv[kept_cols, :] if kept_cols.size else np.zeros((0, sys.n))
    k_cols = y2[:, kept_cols] if kept_cols.size else np.zeros((sys.m, 0))

    notes = []
    k_out = k_cols.copy()
    drop_rows = sorted(set(range(sys.m)) - set(rows))
    k_out[drop_rows, :] = 0.0
    truncated = True
    applied = k_out @ c_map
    report = ms_stable(sys, applied)
    if not report.stable and drop_rows:
        notes.append(f"rows {drop_rows} not removable at tau={opts.tau:g}; "
                     "keeping all output-feedback rows")
        k_out = k_cols
        truncated = False
        applied = k_out @ c_map
        report = ms_stable(sys, applied)
    if not report.stable:
        raise DesignError(
            "oracle verification failed for the output-feedback closed loop "
            f"(margin {report.margin:.3e})")

    # exactness of the factored form on the rows that were kept
    kept_rows = [i for i in range(sys.m) if not truncated or i not in drop_rows]
    if kept_rows:
        gap = float(np.max(np.abs((k_out @ c_map - k_full)[kept_rows, :])))
        if gap > 1e-8 * max(1.0, float(np.max(np.abs(k_full)))):
            raise DesignError(f"output reconstruction identity violated "
                              f"(max deviation {gap:.3e})")

    oracle_cost = None
    if q is not None:
        oracle_cost = lqrm_cost(sys, k_full, q, r)
        bound = kappa + 1e-6 * (1.0 + abs(kappa))
        if not oracle_cost <= bound:
            raise DesignError(
                f"cost certificate violated in phase 2: oracle cost "
                f"{oracle_cost:.12g} > kappa {kappa:.12g}")

    return DesignResult(gain=k_out, output_map=c_map, p=p2, y=y2,
                        gamma=row_spec.gamma, regularizer=row_spec,
                        row_support=rows, col_support=tuple(int(c) for c in kept_cols),
                        oracle=report, kappa=kappa, oracle_cost=oracle_cost,
                        truncated=truncated, notes=tuple(notes),
                        solver_stats=_stats(sol2, handle2))


@dataclass
class SweepRow:
    gamma: float
    kappa: float | None
    rel_cost: float | None
    row_support_size: int | None
    oracle_margin: float | None
    runtime_s: float
    error: str | None = None
    result: DesignResult | None = None


def _sweep_point(args) -> tuple[float, float, "DesignResult | None", str | None]:
    sys, q, r, spec, gamma, opts = args
    from dataclasses import replace

    t0 = time.perf_counter()
    try:
        res = design_state_feedback(sys, q, r, replace(spec, gamma=gamma), opts)
        return gamma, time.perf_counter() - t0, res, None
    except DesignError as exc:
        return gamma, time.perf_counter() - t0, None, str(exc)


def sweep_gamma(sys: StochasticSystem, q, r, spec: RegularizerSpec,
                gamma_grid, opts: DesignOptions | None = None,
                jobs: int = 1) -> list[SweepRow]:
    """One design per gamma; failures are recorded per point, not raised.

    rel_cost is (kappa_gamma - kappa_0) / kappa_0 against the gamma = 0
    design (solved as an extra baseline when 0 is not on the grid).
    Points are solved independently (no warm starts), so jobs > 1 merely
    distributes them over processes without changing any result.
    """
    grid = [float(g) for g in gamma_grid]
    if any(g < 0 for g in grid) or grid != sorted(grid):
        raise DesignError("gamma grid must be nonnegative and sorted ascending")
    opts = opts or DesignOptions()

    work = [(sys, q, r, spec, gamma, opts) for gamma in grid]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_point, work))
    else:
        outcomes = [_sweep_point(w) for w in work]

    kappa0 = None
    for gamma, _, res, _ in outcomes:
        if gamma == 0.0 and res is not None:
            kappa0 = res.kappa
            break
    if kappa0 is None and q is not None:
        _, _, res0, _ = _sweep_point((sys, q, r, spec, 0.0, opts))
        kappa0 = res0.kappa if res0 is not None else None

    rows: list[SweepRow] = []
    for gamma, runtime, res, err in outcomes:
        if res is None:
            rows.append(SweepRow(gamma, None, None, None, None, runtime, error=err))
            continue
        rel = None
        if res.kappa is not None and kappa0:
            rel = (res.kappa - kappa0) / kappa0
        rows.append(SweepRow(gamma, res.kappa, rel, len(res.row_support),
                             res.oracle.margin, runtime, result=res))
    return rows
