"""Monte Carlo verification of closed loops.

Continuous systems are integrated by Euler-Maruyama on the closed loop
(weak order 1, which is all that second-moment comparisons need);
discrete systems iterate their recursion directly. All normal variates
come from a single counter-based Philox stream keyed by the seed and are
consumed in a fixed (step, channel, path) layout, so results are
bit-reproducible and independent of any execution scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import CONTINUOUS, StochasticSystem, close_loop, validate
from .msstab import ms_stable
from .numerics import sym_sqrt


class SimError(ValueError):
    """Raised for invalid simulation parameters."""


@dataclass(frozen=True)
class EnsembleStats:
    """Per-time estimates of E[x'x] with Monte Carlo standard errors."""

    times: np.ndarray
    mean_square: np.ndarray
    stderr: np.ndarray
    paths: int
    seed: int

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time,mean_square,stderr\n")
            for t, ms, se in zip(self.times, self.mean_square, self.stderr):
                fh.write(f"{t!r},{ms!r},{se!r}\n")


@dataclass(frozen=True)
class CostEstimate:
    value: float
    stderr: float
    tail_bound: float  # crude margin-based estimate of the truncation bias


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _initial_states(sys: StochasticSystem, paths: int, rng: np.random.Generator) -> np.ndarray:
    root = sym_sqrt(sys.sigma0)
    return root @ rng.standard_normal((sys.n, paths))


def _step_count(sys: StochasticSystem, horizon, steps, dt):
    if sys.time_domain == CONTINUOUS:
        if dt is None or dt <= 0:
            raise SimError("continuous simulation needs dt > 0")
        if horizon is None or horizon <= 0:
            raise SimError("continuous simulation needs horizon > 0")
        count = int(np.ceil(horizon / dt))
        return count, float(dt)
    if steps is None or int(steps) < 1:
        raise SimError("discrete simulation needs steps >= 1")
    return int(steps), 1.0


def simulate(sys: StochasticSystem, gain: np.ndarray | None = None, *,
             horizon: float | None = None, steps: int | None = None,
             dt: float | None = None, paths: int = 1000,
             seed: int = 0) -> EnsembleStats:
    """Ensemble second-moment trajectory of the closed loop under u = K x."""
    validate(sys)
    if paths < 1:
        raise SimError("paths must be >= 1")
    if gain is None:
        gain = np.zeros((sys.m, sys.n))
    cl = close_loop(sys, gain)
    nsteps, step = _step_count(sys, horizon, steps, dt)
    continuous = sys.time_domain == CONTINUOUS
    if continuous and step * float(np.linalg.norm(cl.drift, np.inf)) > 0.5:
        warnings.warn("dt * ||drift|| > 0.5: Euler-Maruyama step looks too "
                      "coarse for this system", stacklevel=2)

    rng = _rng(seed)
    x = _initial_states(sys, paths, rng)
    sqrt_dt = np.sqrt(step)
    diffusion = [(c, d) for c, d in cl.diffusion if c != 0.0]

    times = np.empty(nsteps + 1)
    mean_sq = np.empty(nsteps + 1)
    stderr = np.empty(nsteps + 1)

    def record(k: int) -> None:
        sq = np.sum(x * x, axis=0)
        times[k] = k * step if continuous else float(k)
        mean_sq[k] = float(np.mean(sq))
        stderr[k] = float(np.std(sq) / np.sqrt(paths))

    record(0)
    for k in range(1, nsteps + 1):
        noise = rng.standard_normal((len(diffusion), paths)) if diffusion else None
        if continuous:
            delta = cl.drift @ x * step
            for idx, (c, d) in enumerate(diffusion):
                delta += (c * sqrt_dt) * (d @ x) * noise[idx]
            x = x + delta
        else:
            nxt = cl.drift @ x
            for idx, (c, d) in enumerate(diffusion):
                nxt += c * (d @ x) * noise[idx]
            x = nxt
        record(k)
    return EnsembleStats(times=times, mean_square=mean_sq, stderr=stderr,
                         paths=paths, seed=seed)


def empirical_cost(sys: StochasticSystem, gain: np.ndarray, q: np.ndarray,
                   r: np.ndarray, *, horizon: float | None = None,
                   steps: int | None = None, dt: float | None = None,
                   paths: int = 1000, seed: int = 0) -> CostEstimate:
    """Monte Carlo quadratic cost of u = K x (trapezoid in continuous time).

    On mean-square stable loops this is consistent with the exact cost up
    to sampling error plus the reported horizon-truncation tail bound.
    """
    validate(sys)
    gain = np.asarray(gain, dtype=float)
    report = ms_stable(sys, gain)
    if not report.stable:
        warnings.warn("closed loop is not mean-square stable; the cost "
                      "estimate will diverge with the horizon", stacklevel=2)
    cl = close_loop(sys, gain)
    nsteps, step = _step_count(sys, horizon, steps, dt)
    continuous = sys.time_domain == CONTINUOUS
    qk = np.asarray(q, dtype=float) + gain.T @ np.asarray(r, dtype=float) @ gain

    rng = _rng(seed)
    x = _initial_states(sys, paths, rng)
    diffusion = [(c, d) for c, d in cl.diffusion if c != 0.0]
    sqrt_dt = np.sqrt(step)

    def quad(xs: np.ndarray) -> np.ndarray:
        return np.sum(xs * (qk @ xs), axis=0)

    acc = np.zeros(x.shape[1])
    prev = quad(x)
    if not continuous:
        acc += prev
    for _ in range(nsteps):
        noise = rng.standard_normal((len(diffusion), x.shape[1])) if diffusion else None
        if continuous:
            delta = cl.drift @ x * step
            for idx, (c, d) in enumerate(diffusion):
                delta += (c * sqrt_dt) * (d @ x) * noise[idx]
            x = x + delta
            cur = quad(x)
            acc += 0.5 * (prev + cur) * step
            prev = cur
        else:
            nxt = cl.drift @ x
            for idx, (c, d) in enumerate(diffusion):
                nxt += c * (d @ x) * noise[idx]
            x = nxt
            acc += quad(x)

    value = float(np.mean(acc))
    stderr = float(np.std(acc) / np.sqrt(x.shape[1]))
    final_quad = float(np.mean(quad(x)))
    if report.stable and report.margin > 0:
        tail = final_quad / report.margin if continuous \
            else final_quad * (1.0 - report.margin) / report.margin
    else:
        tail = float("inf")
    return CostEstimate(value=value, stderr=stderr, tail_bound=tail)
