"""Command-line front end: design runs, gamma sweeps, stability checks,
Monte Carlo simulation, and SDPA export.

Exit codes: 0 success, 1 usage/input error, 2 infeasible or unstable,
3 solver numerical failure. Every command is deterministic given its
flags plus the seed (flag --seed, or the SPARSELMI_SEED environment
variable); reports embed the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import lmi, sdpa
from .design import (DesignError, DesignInfeasibleError, DesignNumericalError,
                     DesignOptions, design_output_feedback,
                     design_state_feedback, sweep_gamma)
from .lmi import RegularizerSpec
from .model import ModelError, StochasticSystem, load_system, validate
from .msstab import ms_stable
from .numerics import NumericsError, read_matrix_csv, write_matrix_csv
from .powergrid import GridError, build_swing_system, parse_network
from .sim import SimError, simulate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

_REG_KINDS = {
    "row-norm": lmi.ROW_NORM,
    "col-norm": lmi.COL_NORM,
    "row-glasso": lmi.ROW_GROUP_LASSO,
    "col-glasso": lmi.COL_GROUP_LASSO,
    "row-sglasso": lmi.ROW_SPARSE_GROUP_LASSO,
    "col-sglasso": lmi.COL_SPARSE_GROUP_LASSO,
    "none": lmi.NONE,
}


class UsageError(ValueError):
    pass


def _default_seed() -> int:
    return int(os.environ.get("SPARSELMI_SEED", "0"))


def _matrix_spec(value: str, size: int, name: str) -> np.ndarray:
    """A flag value that is either a scale (for scale*I) or a CSV path."""
    try:
        return float(value) * np.eye(size)
    except ValueError:
        pass
    try:
        mat = read_matrix_csv(value)
    except (OSError, NumericsError) as exc:
        raise UsageError(f"{name}: {exc}") from exc
    if mat.shape != (size, size):
        raise UsageError(f"{name}: expected {size}x{size}, got {mat.shape}")
    return mat


def _load_plant(args) -> StochasticSystem:
    if bool(args.system) == bool(args.network):
        raise UsageError("provide exactly one of --system or --network")
    if args.system:
        sys_ = load_system(args.system)
    else:
        net = parse_network(args.network)
        sigma0 = None
        if args.sigma0 is not None:
            sigma0 = args.sigma0  # resolved below once n is known
        sys_ = build_swing_system(net)
        if sigma0 is not None:
            sys_ = replace(sys_, sigma0=_matrix_spec(sigma0, sys_.n, "--sigma0"))
    if args.system and args.sigma0 is not None:
        sys_ = replace(sys_, sigma0=_matrix_spec(args.sigma0, sys_.n, "--sigma0"))
    if getattr(args, "time_domain", None):
        sys_ = replace(sys_, time_domain=args.time_domain)
    validate(sys_)
    return sys_


def _cost_weights(args, sys_: StochasticSystem):
    if args.stabilize_only:
        return None, None
    q = _matrix_spec(args.q, sys_.n, "--q")
    r = _matrix_spec(args.r, sys_.m, "--r")
    return q, r


def _reg_spec(kind: str, gamma: float, mu: float | None) -> RegularizerSpec:
    if kind not in _REG_KINDS:
        raise UsageError(f"unknown regularizer {kind!r}; choose from "
                         f"{sorted(_REG_KINDS)}")
    mapped = _REG_KINDS[kind]
    needs_mu = mapped in (lmi.ROW_SPARSE_GROUP_LASSO, lmi.COL_SPARSE_GROUP_LASSO)
    return RegularizerSpec(mapped, gamma, mu if needs_mu else None)


def _design_opts(args) -> DesignOptions:
    return DesignOptions(eps=args.eps, tau=args.tau, tolerance=args.tol,
                         verbose=args.verbose)


def _resolved_config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_design(args) -> int:
    sys_ = _load_plant(args)
    q, r = _cost_weights(args, sys_)
    opts = _design_opts(args)
    out = _outdir(args)
    if args.mode == "state":
        spec = _reg_spec(args.reg, args.gamma, args.mu)
        result = design_state_feedback(sys_, q, r, spec, opts)
    else:
        col = _reg_spec(args.reg_col, args.gamma_col, args.mu_col)
        row = _reg_spec(args.reg_row, args.gamma_row, args.mu_row)
        result = design_output_feedback(sys_, q, r, col, row, opts)
    result.save_json(out / "design.json", extra={"config": _resolved_config(args)})
    write_matrix_csv(out / "K.csv", result.gain)
    if result.output_map is not None:
        write_matrix_csv(out / "C.csv", result.output_map)
    print(f"verified gain written to {out / 'K.csv'}; oracle margin "
          f"{result.oracle.margin:.6g}"
          + (f"; kappa {result.kappa:.6g}" if result.kappa is not None else ""))
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("grid range must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise UsageError("grid step must be positive")
        grid = list(np.arange(start, stop + 0.5 * step, step))
        return [float(g) for g in grid]
    return [float(p) for p in text.replace(",", " ").split()]


def cmd_sweep(args) -> int:
    sys_ = _load_plant(args)
    q, r = _cost_weights(args, sys_)
    spec = _reg_spec(args.reg, 0.0, args.mu)
    grid = _parse_grid(args.gamma_grid)
    rows = sweep_gamma(sys_, q, r, spec, grid, _design_opts(args), jobs=args.jobs)
    out = _outdir(args)
    path = out / "tradeoff.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gamma,kappa,rel_cost,row_support_size,oracle_margin,runtime_s,error\n")
        for row in rows:
            fields = [repr(row.gamma),
                      "" if row.kappa is None else repr(row.kappa),
                      "" if row.rel_cost is None else repr(row.rel_cost),
                      "" if row.row_support_size is None else str(row.row_support_size),
                      "" if row.oracle_margin is None else repr(row.oracle_margin),
                      repr(row.runtime_s),
                      "" if row.error is None else json.dumps(row.error)]
            fh.write(",".join(fields) + "\n")
    failures = sum(1 for row in rows if row.error)
    print(f"{len(rows)} sweep points written to {path} ({failures} failed)")
    return EXIT_OK


def cmd_check(args) -> int:
    sys_ = _load_plant(args)
    gain = read_matrix_csv(args.k)
    if args.c:
        gain = gain @ read_matrix_csv(args.c)
    report = ms_stable(sys_, gain)
    verdict = "stable" if report.stable else "unstable"
    print(f"{verdict} margin {report.margin:.9g} "
          f"(lifted dimension {report.lifted_dimension})")
    return EXIT_OK if report.stable else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    sys_ = _load_plant(args)
    gain = read_matrix_csv(args.k) if args.k else None
    stats = simulate(sys_, gain, horizon=args.horizon, steps=args.steps,
                     dt=args.dt, paths=args.paths, seed=args.seed)
    out = _outdir(args)
    stats.save_csv(out / "ensemble.csv")
    print(f"{stats.paths} paths over {len(stats.times)} samples written to "
          f"{out / 'ensemble.csv'}; final mean square "
          f"{stats.mean_square[-1]:.6g} (stderr {stats.stderr[-1]:.2g})")
    return EXIT_OK


def cmd_export(args) -> int:
    sys_ = _load_plant(args)
    q, r = _cost_weights(args, sys_)
    if sys_.time_domain == "continuous":
        handle = (lmi.build_stability_lmi_ct(sys_, args.eps) if q is None
                  else lmi.build_lqrm_sdp_ct(sys_, q, r, args.eps))
    else:
        handle = (lmi.build_stability_lmi_dt(sys_, args.eps) if q is None
                  else lmi.build_lqrm_sdp_dt(sys_, q, r, args.eps))
    spec = _reg_spec(args.reg, args.gamma, args.mu)
    handle = lmi.add_regularizer(handle, spec)
    sdpa.export_sdpa(handle.program(), args.out)
    print(f"SDPA problem written to {args.out}")
    return EXIT_OK


def _add_plant_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", help="stochastic system JSON file")
    p.add_argument("--network", help="power network .net file")
    p.add_argument("--time-domain", choices=["continuous", "discrete"],
                   help="override the plant's time domain")
    p.add_argument("--sigma0", help="initial second moment: scale or CSV path")


def _add_cost_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", default="1.0", help="state weight: scale or CSV path")
    p.add_argument("--r", default="1.0", help="input weight: scale or CSV path")
    p.add_argument("--stabilize-only", action="store_true",
                   help="drop the cost objective and solve the pure "
                        "stabilization problem")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=None,
                   help="strict-inequality shift (default 1e-6*max(1,||A0||))")
    p.add_argument("--tau", type=float, default=1e-3,
                   help="relative support threshold")
    p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
    p.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sparselmi",
        description="Sparse feedback design for multiplicative-noise systems")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="synthesize a verified feedback gain")
    _add_plant_flags(d)
    _add_cost_flags(d)
    _add_solver_flags(d)
    d.add_argument("--mode", choices=["state", "output"], default="state")
    d.add_argument("--reg", default="none", help="state-feedback regularizer")
    d.add_argument("--gamma", type=float, default=0.0)
    d.add_argument("--mu", type=float, default=0.5)
    d.add_argument("--reg-col", default="col-norm", help="output phase-1 regularizer")
    d.add_argument("--gamma-col", type=float, default=1.0)
    d.add_argument("--mu-col", type=float, default=0.5)
    d.add_argument("--reg-row", default="row-norm", help="output phase-2 regularizer")
    d.add_argument("--gamma-row", type=float, default=1.0)
    d.add_argument("--mu-row", type=float, default=0.5)
    d.add_argument("--out", default="out")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("sweep", help="trade off sparsity against cost over gamma")
    _add_plant_flags(s)
    _add_cost_flags(s)
    _add_solver_flags(s)
    s.add_argument("--reg", default="row-norm")
    s.add_argument("--mu", type=float, default=0.5)
    s.add_argument("--gamma-grid", required=True,
                   help="comma list or start:step:stop range")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check", help="oracle-check a gain against a plant")
    _add_plant_flags(c)
    c.add_argument("--k", required=True, help="gain matrix CSV")
    c.add_argument("--c", help="optional output map CSV (checks u = K C x)")
    c.set_defaults(func=cmd_check)

    m = sub.add_parser("simulate", help="Monte Carlo ensemble of the closed loop")
    _add_plant_flags(m)
    m.add_argument("--k", help="gain matrix CSV (default zero gain)")
    m.add_argument("--horizon", type=float, help="continuous-time horizon")
    m.add_argument("--dt", type=float, help="continuous-time step")
    m.add_argument("--steps", type=int, help="discrete-time step count")
    m.add_argument("--paths", type=int, default=1000)
    m.add_argument("--seed", type=int, default=_default_seed())
    m.add_argument("--out", default="out")
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("export", help="export the design SDP in sparse SDPA format")
    _add_plant_flags(e)
    _add_cost_flags(e)
    _add_solver_flags(e)
    e.add_argument("--reg", default="none")
    e.add_argument("--gamma", type=float, default=0.0)
    e.add_argument("--mu", type=float, default=0.5)
    e.add_argument("--out", required=True, help="output .dat-s path")
    e.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ModelError, GridError, NumericsError, SimError,
            lmi.LmiError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except DesignInfeasibleError as exc:
        print(f"infeasible: {exc}", file=_sys.stderr)
        return EXIT_INFEASIBLE
    except DesignNumericalError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL
    except DesignError as exc:
        print(f"design error: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
