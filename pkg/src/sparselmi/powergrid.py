"""Swing-equation network models with random inertia.

A GridNetwork lists generator and load buses plus susceptance-weighted
lines. build_swing_system linearizes the swing dynamics around zero
angles with state ordering x = [theta_g; omega_g; theta_l]:

    theta_g' = omega_g
    M omega_g' = -L_gg theta_g - D_g omega_g - L_gl theta_l + u
    D_l theta_l' = -L_lg theta_g - L_ll theta_l

Each generator's inverse inertia is random with relative spread
sigma_rel, giving one coupled noise channel per generator whose state
and input projections live in that generator's frequency row. An
optional infinite bus is grounded by deleting its angle; couplings to it
stay on the diagonal as stiffness terms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .model import CONTINUOUS, NoiseChannel, StochasticSystem

GEN = "gen"
LOAD = "load"


class GridError(ValueError):
    """Raised for malformed networks or network files."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    inertia_mean: float | None = None
    sigma_rel: float | None = None
    damping: float = 0.0


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance: float


@dataclass(frozen=True)
class GridNetwork:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    infinite_bus: int | None = None

    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]


def validate_network(net: GridNetwork) -> None:
    ids = net.bus_ids()
    if len(ids) != len(set(ids)):
        raise GridError("bus ids must be unique")
    id_set = set(ids)
    problems = []
    for b in net.buses:
        if b.kind not in (GEN, LOAD):
            problems.append(f"bus {b.id}: kind must be gen or load, got {b.kind!r}")
        if b.kind == GEN:
            if b.inertia_mean is None or b.inertia_mean <= 0:
                problems.append(f"bus {b.id}: generator inertia must be > 0")
            if b.sigma_rel is None or b.sigma_rel < 0:
                problems.append(f"bus {b.id}: sigma_rel must be >= 0")
        if b.damping <= 0:
            problems.append(f"bus {b.id}: damping must be > 0")
    for ln in net.lines:
        if ln.from_bus not in id_set or ln.to_bus not in id_set:
            problems.append(f"line {ln.from_bus}-{ln.to_bus}: unknown bus")
        if ln.from_bus == ln.to_bus:
            problems.append(f"line {ln.from_bus}-{ln.to_bus}: self-loop")
        if ln.susceptance <= 0:
            problems.append(f"line {ln.from_bus}-{ln.to_bus}: susceptance must be > 0")
    if net.infinite_bus is not None and net.infinite_bus not in id_set:
        problems.append(f"infinite bus {net.infinite_bus} is not a listed bus")
    if problems:
        raise GridError("; ".join(problems))
    if not _connected(net):
        warnings.warn("network graph is not connected", stacklevel=2)


def _connected(net: GridNetwork) -> bool:
    ids = net.bus_ids()
    if not ids:
        return True
    adj: dict[int, set[int]] = {i: set() for i in ids}
    for ln in net.lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(ids)


def laplacian(net: GridNetwork) -> np.ndarray:
    """Susceptance-weighted graph Laplacian in bus listing order.

    Parallel lines between the same pair have their susceptances summed.
    """
    validate_network(net)
    pos = {b.id: k for k, b in enumerate(net.buses)}
    n = len(net.buses)
    lap = np.zeros((n, n))
    for ln in net.lines:
        i, j = pos[ln.from_bus], pos[ln.to_bus]
        lap[i, j] -= ln.susceptance
        lap[j, i] -= ln.susceptance
        lap[i, i] += ln.susceptance
        lap[j, j] += ln.susceptance
    return lap


def build_swing_system(net: GridNetwork, sigma0: np.ndarray | float | None = None,
                       printed_noise_sign: bool = True,
                       include_input_drift: bool = True) -> StochasticSystem:
    """Stochastic swing-equation model of the network.

    printed_noise_sign keeps the state-noise blocks +R_i [L_gg, D_g, L_gl];
    the physically-signed alternative (False) negates them so a positive
    inertia-inverse perturbation perturbs the -M^{-1} rows downward. The
    input projection is +R_i either way. include_input_drift=False drops
    the B0 u dt drift term while keeping B0's shape (the displayed
    power-grid dynamics omit it; we default to including it).
    """
    validate_network(net)
    gens = [b for b in net.buses if b.kind == GEN and b.id != net.infinite_bus]
    loads = [b for b in net.buses if b.kind == LOAD and b.id != net.infinite_bus]
    if not gens:
        raise GridError("network needs at least one (non-grounded) generator")

    lap = laplacian(net)
    pos = {b.id: k for k, b in enumerate(net.buses)}
    keep_g = [pos[b.id] for b in gens]
    keep_l = [pos[b.id] for b in loads]
    l_gg = lap[np.ix_(keep_g, keep_g)]
    l_gl = lap[np.ix_(keep_g, keep_l)]
    l_lg = lap[np.ix_(keep_l, keep_g)]
    l_ll = lap[np.ix_(keep_l, keep_l)]

    g = len(gens)
    l = len(loads)
    n = 2 * g + l
    m_inv = np.diag([1.0 / b.inertia_mean for b in gens])
    d_g = np.diag([b.damping for b in gens])
    d_l_inv = np.diag([1.0 / b.damping for b in loads])

    a0 = np.zeros((n, n))
    a0[:g, g:2 * g] = np.eye(g)
    a0[g:2 * g, :g] = -m_inv @ l_gg
    a0[g:2 * g, g:2 * g] = -m_inv @ d_g
    a0[g:2 * g, 2 * g:] = -m_inv @ l_gl
    a0[2 * g:, :g] = -d_l_inv @ l_lg
    a0[2 * g:, 2 * g:] = -d_l_inv @ l_ll

    b0 = np.zeros((n, g))
    if include_input_drift:
        b0[g:2 * g, :] = m_inv

    sign = 1.0 if printed_noise_sign else -1.0
    channels = []
    for i, bus in enumerate(gens):
        sigma = bus.sigma_rel / bus.inertia_mean
        if sigma == 0.0:
            continue
        a_i = np.zeros((n, n))
        a_i[g + i, :g] = sign * l_gg[i, :]
        a_i[g + i, g + i] = sign * d_g[i, i]
        a_i[g + i, 2 * g:] = sign * l_gl[i, :]
        b_i = np.zeros((n, g))
        b_i[g + i, i] = 1.0
        channels.append(NoiseChannel(intensity=sigma, state_matrix=a_i,
                                     input_matrix=b_i))

    if sigma0 is None:
        s0 = 0.1 * np.eye(n)
    elif np.isscalar(sigma0):
        s0 = float(sigma0) * np.eye(n)
    else:
        s0 = np.asarray(sigma0, dtype=float)
    return StochasticSystem(time_domain=CONTINUOUS, a0=a0, b0=b0,
                            channels=tuple(channels), sigma0=s0)


# ---------------------------------------------------------------------------
# network file format
#
#   # comment
#   [buses]
#   <id>, <gen|load>, <inertia_mean|->, <sigma_rel|->, <damping>
#   [lines]
#   <from>, <to>, <susceptance>
#   [grounding]
#   infinite_bus = <id>
#
# The grounding section is optional. '-' marks inertia fields on load buses.


def _fmt(x: float) -> str:
    return repr(float(x))


def write_network(net: GridNetwork, path) -> None:
    validate_network(net)
    lines = ["[buses]"]
    for b in net.buses:
        if b.kind == GEN:
            lines.append(f"{b.id}, gen, {_fmt(b.inertia_mean)}, "
                         f"{_fmt(b.sigma_rel)}, {_fmt(b.damping)}")
        else:
            lines.append(f"{b.id}, load, -, -, {_fmt(b.damping)}")
    lines.append("[lines]")
    for ln in net.lines:
        lines.append(f"{ln.from_bus}, {ln.to_bus}, {_fmt(ln.susceptance)}")
    if net.infinite_bus is not None:
        lines.append("[grounding]")
        lines.append(f"infinite_bus = {net.infinite_bus}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_network_text(text: str, origin: str = "<string>") -> GridNetwork:
    buses: list[Bus] = []
    lines: list[Line] = []
    infinite: int | None = None
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line not in ("[buses]", "[lines]", "[grounding]"):
                raise GridError(f"{origin}:{lineno}: unknown section {line}")
            section = line
            continue
        if section == "[buses]":
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != 5:
                raise GridError(f"{origin}:{lineno}: bus line needs 5 fields, "
                                f"got {len(fields)}")
            try:
                bid = int(fields[0])
                kind = fields[1]
                inertia = None if fields[2] == "-" else float(fields[2])
                sig = None if fields[3] == "-" else float(fields[3])
                damping = float(fields[4])
            except ValueError as exc:
                raise GridError(f"{origin}:{lineno}: non-numeric field ({exc})") from exc
            buses.append(Bus(bid, kind, inertia, sig, damping))
        elif section == "[lines]":
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != 3:
                raise GridError(f"{origin}:{lineno}: line entry needs 3 fields, "
                                f"got {len(fields)}")
            try:
                lines.append(Line(int(fields[0]), int(fields[1]), float(fields[2])))
            except ValueError as exc:
                raise GridError(f"{origin}:{lineno}: non-numeric field ({exc})") from exc
        elif section == "[grounding]":
            key, _, val = line.partition("=")
            if key.strip() != "infinite_bus":
                raise GridError(f"{origin}:{lineno}: unknown grounding key "
                                f"{key.strip()!r}")
            try:
                infinite = int(val.strip())
            except ValueError as exc:
                raise GridError(f"{origin}:{lineno}: non-numeric bus id") from exc
        else:
            raise GridError(f"{origin}:{lineno}: content before any section")
    net = GridNetwork(tuple(buses), tuple(lines), infinite)
    validate_network(net)
    return net


def parse_network(path) -> GridNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network_text(fh.read(), origin=str(path))


def bundled_network(name: str) -> GridNetwork:
    """Load a network shipped with the package ('fourbus' or 'ieee39')."""
    ref = resources.files("sparselmi").joinpath(f"data/{name}.net")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise GridError(f"no bundled network named {name!r}") from exc
    return parse_network_text(text, origin=f"bundled:{name}")
