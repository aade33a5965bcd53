"""Stochastic linear systems with multiplicative noise.

A system is ``dx = (A0 x + B0 u) dt + sum_i c_i (A_i x + B_i u) dW_i``
in continuous time, or the analogous one-step recursion in discrete
time. Each noise channel carries one scalar intensity and projects the
state, the input, or both (the coupled case needed by the power-grid
inertia model).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_matrix, is_symmetric, sym

CONTINUOUS = "continuous"
DISCRETE = "discrete"


class ModelError(ValueError):
    """Raised when a system violates its structural invariants."""


@dataclass(frozen=True)
class NoiseChannel:
    """One scalar noise process with its state/input projections.

    At least one of ``state_matrix`` (n x n) and ``input_matrix`` (n x m)
    must be present; a channel carrying both models a single disturbance
    hitting state and input simultaneously.
    """

    intensity: float
    state_matrix: np.ndarray | None = None
    input_matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.state_matrix is not None:
            object.__setattr__(self, "state_matrix", as_matrix(self.state_matrix, "channel A"))
        if self.input_matrix is not None:
            object.__setattr__(self, "input_matrix", as_matrix(self.input_matrix, "channel B"))


@dataclass(frozen=True)
class StochasticSystem:
    """Multiplicative-noise linear system plus initial second moment."""

    time_domain: str
    a0: np.ndarray
    b0: np.ndarray
    channels: tuple[NoiseChannel, ...] = ()
    sigma0: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "a0", as_matrix(self.a0, "A0"))
        object.__setattr__(self, "b0", as_matrix(self.b0, "B0"))
        object.__setattr__(self, "channels", tuple(self.channels))
        s0 = self.sigma0 if self.sigma0 is not None else np.zeros_like(self.a0)
        object.__setattr__(self, "sigma0", as_matrix(s0, "Sigma0"))

    @property
    def n(self) -> int:
        return self.a0.shape[0]

    @property
    def m(self) -> int:
        return self.b0.shape[1]


@dataclass(frozen=True)
class ClosedLoop:
    """Drift A0 + B0 K and per-channel diffusion matrices (intensity, D_i)."""

    time_domain: str
    drift: np.ndarray
    diffusion: tuple[tuple[float, np.ndarray], ...] = field(default_factory=tuple)


def validate(sys: StochasticSystem) -> None:
    """Check every structural invariant; raises ModelError listing all violations."""
    problems: list[str] = []
    if sys.time_domain not in (CONTINUOUS, DISCRETE):
        problems.append(f"time_domain must be '{CONTINUOUS}' or '{DISCRETE}', got {sys.time_domain!r}")
    n = sys.a0.shape[0]
    if sys.a0.shape[0] != sys.a0.shape[1]:
        problems.append(f"A0 must be square, got {sys.a0.shape}")
    if sys.b0.shape[0] != n:
        problems.append(f"B0 has {sys.b0.shape[0]} rows, expected {n}")
    if sys.sigma0.shape != (n, n):
        problems.append(f"Sigma0 has shape {sys.sigma0.shape}, expected {(n, n)}")
    elif not is_symmetric(sys.sigma0, rtol=1e-10):
        problems.append("Sigma0 not symmetric")
    else:
        w = np.linalg.eigvalsh(sym(sys.sigma0))
        scale = max(abs(w[-1]), 1.0) if w.size else 1.0
        if w.size and w[0] < -1e-10 * scale:
            problems.append(f"Sigma0 not PSD (lambda_min = {w[0]:.3e})")
    m = sys.b0.shape[1]
    for idx, ch in enumerate(sys.channels):
        if ch.intensity < 0:
            problems.append(f"channel {idx}: negative intensity {ch.intensity}")
        if ch.state_matrix is None and ch.input_matrix is None:
            problems.append(f"channel {idx}: empty (needs a state or input matrix)")
        if ch.state_matrix is not None and ch.state_matrix.shape != (n, n):
            problems.append(
                f"channel {idx}: state matrix shape {ch.state_matrix.shape}, expected {(n, n)}"
            )
        if ch.input_matrix is not None and ch.input_matrix.shape != (n, m):
            problems.append(
                f"channel {idx}: input matrix shape {ch.input_matrix.shape}, expected {(n, m)}"
            )
    if problems:
        raise ModelError("; ".join(problems))


def close_loop(sys: StochasticSystem, gain: np.ndarray) -> ClosedLoop:
    """Assemble the closed loop under u = K x.

    Drift is A0 + B0 K. Channel diffusion: state-only gives A_i,
    input-only gives B_j K, coupled gives A_i + B_i K, each scaled by its
    intensity when the second moment is lifted.
    """
    validate(sys)
    k = as_matrix(gain, "K")
    if k.shape != (sys.m, sys.n):
        raise ModelError(f"K has shape {k.shape}, expected {(sys.m, sys.n)}")
    drift = sys.a0 + sys.b0 @ k
    diffusion = []
    for ch in sys.channels:
        d = np.zeros((sys.n, sys.n))
        if ch.state_matrix is not None:
            d = d + ch.state_matrix
        if ch.input_matrix is not None:
            d = d + ch.input_matrix @ k
        diffusion.append((float(ch.intensity), d))
    return ClosedLoop(sys.time_domain, drift, tuple(diffusion))


_SYSTEM_FIELDS = {"time_domain", "A0", "B0", "channels", "Sigma0"}
_CHANNEL_FIELDS = {"intensity", "A", "B"}


def system_to_dict(sys: StochasticSystem) -> dict:
    channels = []
    for ch in sys.channels:
        entry: dict = {"intensity": float(ch.intensity)}
        if ch.state_matrix is not None:
            entry["A"] = ch.state_matrix.tolist()
        if ch.input_matrix is not None:
            entry["B"] = ch.input_matrix.tolist()
        channels.append(entry)
    return {
        "time_domain": sys.time_domain,
        "A0": sys.a0.tolist(),
        "B0": sys.b0.tolist(),
        "channels": channels,
        "Sigma0": sys.sigma0.tolist(),
    }


def system_from_dict(data: dict) -> StochasticSystem:
    unknown = set(data) - _SYSTEM_FIELDS
    if unknown:
        raise ModelError(f"unknown system fields: {sorted(unknown)}")
    missing = _SYSTEM_FIELDS - set(data)
    if missing:
        raise ModelError(f"missing system fields: {sorted(missing)}")
    channels = []
    for idx, entry in enumerate(data["channels"]):
        bad = set(entry) - _CHANNEL_FIELDS
        if bad:
            raise ModelError(f"channel {idx}: unknown fields {sorted(bad)}")
        if "intensity" not in entry:
            raise ModelError(f"channel {idx}: missing intensity")
        channels.append(
            NoiseChannel(
                intensity=float(entry["intensity"]),
                state_matrix=np.array(entry["A"], dtype=float) if "A" in entry else None,
                input_matrix=np.array(entry["B"], dtype=float) if "B" in entry else None,
            )
        )
    sys = StochasticSystem(
        time_domain=data["time_domain"],
        a0=np.array(data["A0"], dtype=float),
        b0=np.array(data["B0"], dtype=float),
        channels=tuple(channels),
        sigma0=np.array(data["Sigma0"], dtype=float),
    )
    validate(sys)
    return sys


def save_system(sys: StochasticSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_dict(sys), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_system(path) -> StochasticSystem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return system_from_dict(data)
