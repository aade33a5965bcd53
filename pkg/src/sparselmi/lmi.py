"""LMI and SDP builders for mean-square stabilization and cost design.

Matrix variables are the symmetric P (n x n) and the gain factor
Y = K P (m x n); cost problems add the slack pair (Pi, kappa) bounding
Tr(Sigma0 P^{-1}) <= Tr(Pi) <= kappa. Builders emit ConicProgram
instances; strict definiteness is realized as a shift by eps*I with one
eps knob per problem (default 1e-6 * max(1, ||A0||_inf)).

Continuous time: the stability block requires

    -[ A0 P + P A0' + B0 Y + Y'B0',  Z  ]
     [ Z',                           Z_P] >= eps I,   P >= eps I,

with one block column of Z per channel (state: c P A_i', input:
c Y'B_j', coupled: c (P A_i' + Y'B_i')) and Z_P = blkdiag(-P, ...).
The cost problem appends Y' and P block columns against -R^{-1} and
-Q^{-1} diagonals and minimizes kappa plus the sparsity regularizer.

Discrete time: the stability block is

    [ P,    A0 P + B0 Y,  Zbar ]
    [ *',   P,            0    ]   >= eps I
    [ Zbar', 0,           blkdiag(P, ...) ]

(the second-moment form; block columns of Zbar as above but
untransposed). The discrete cost problem uses the transposed-orientation
variant whose Schur complement reproduces the cost-supersolution
inequality in X = P^{-1}, which is what makes kappa a certified upper
bound; see build_lqrm_sdp_dt.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .conic import (NONNEG, PSD, SOC, BlockHandle, ConicProgram,
                    ProgramBuilder, smat, svec_dim, svec_indices)
from .model import CONTINUOUS, DISCRETE, StochasticSystem, validate
from .numerics import pd_inverse, sym, sym_sqrt

ROW_NORM = "row_norm"
COL_NORM = "col_norm"
ROW_GROUP_LASSO = "row_group_lasso"
COL_GROUP_LASSO = "col_group_lasso"
ROW_SPARSE_GROUP_LASSO = "row_sparse_group_lasso"
COL_SPARSE_GROUP_LASSO = "col_sparse_group_lasso"
NONE = "none"

_ROW_KINDS = (ROW_NORM, ROW_GROUP_LASSO, ROW_SPARSE_GROUP_LASSO)
_COL_KINDS = (COL_NORM, COL_GROUP_LASSO, COL_SPARSE_GROUP_LASSO)
_ALL_KINDS = _ROW_KINDS + _COL_KINDS + (NONE,)


class LmiError(ValueError):
    """Raised for invalid builder inputs."""


@dataclass(frozen=True)
class RegularizerSpec:
    """Sparsity-promoting norm selection with weight gamma.

    mu in [0, 1] balances the entrywise l1 and the group l2 parts and is
    only meaningful (and only allowed) for the sparse group LASSO kinds.
    """

    kind: str
    gamma: float = 1.0
    mu: float | None = None

    def __post_init__(self):
        if self.kind not in _ALL_KINDS:
            raise LmiError(f"unknown regularizer kind {self.kind!r}")
        if self.gamma < 0:
            raise LmiError("gamma must be nonnegative")
        sparse_group = self.kind in (ROW_SPARSE_GROUP_LASSO, COL_SPARSE_GROUP_LASSO)
        if sparse_group and (self.mu is None or not 0.0 <= self.mu <= 1.0):
            raise LmiError("sparse group LASSO requires mu in [0, 1]")
        if not sparse_group and self.mu is not None:
            raise LmiError(f"mu is only valid for sparse group LASSO, not {self.kind}")

    @staticmethod
    def none() -> "RegularizerSpec":
        return RegularizerSpec(NONE, 0.0)

    @property
    def row_oriented(self) -> bool:
        return self.kind in _ROW_KINDS

    @property
    def col_oriented(self) -> bool:
        return self.kind in _COL_KINDS

    def value(self, y: np.ndarray) -> float:
        """Evaluate the bare norm (without gamma) on a fixed matrix."""
        y = np.asarray(y, dtype=float)
        if self.kind == NONE:
            return 0.0
        groups = y if self.row_oriented else y.T
        if self.kind in (ROW_NORM, COL_NORM):
            return float(np.sum(np.max(np.abs(groups), axis=1)))
        if self.kind in (ROW_GROUP_LASSO, COL_GROUP_LASSO):
            return float(np.sum(np.linalg.norm(groups, axis=1)))
        l1 = np.sum(np.abs(groups), axis=1)
        l2 = np.linalg.norm(groups, axis=1)
        return float(np.sum((1.0 - self.mu) * l1 + self.mu * l2))


def default_eps(sys: StochasticSystem) -> float:
    """Strictness shift: 1e-6 scaled by max(1, ||A0||_inf)."""
    scale = float(np.linalg.norm(sys.a0, np.inf)) if sys.a0.size else 0.0
    return 1e-6 * max(1.0, scale)


@dataclass(frozen=True)
class LmiHandle:
    """A built matrix-inequality problem plus variable bookkeeping.

    p_index / y_index / pi_index are index arrays into the flat variable
    vector (symmetric entries share one variable); extras hold epigraph
    variables introduced by regularizers.
    """

    builder: ProgramBuilder
    sys: StochasticSystem
    eps: float
    p_index: np.ndarray
    y_index: np.ndarray
    pi_index: np.ndarray | None = None
    kappa_index: int | None = None
    psd_block_sides: tuple[int, ...] = ()
    regularizer: RegularizerSpec | None = None

    def program(self) -> ConicProgram:
        return self.builder.build()

    def extract(self, x: np.ndarray) -> dict:
        out = {"P": sym(np.asarray(x)[self.p_index]),
               "Y": np.asarray(x)[self.y_index]}
        if self.pi_index is not None:
            out["Pi"] = sym(np.asarray(x)[self.pi_index])
        if self.kappa_index is not None:
            out["kappa"] = float(x[self.kappa_index])
        return out

    def slack_matrices(self, x: np.ndarray) -> list[np.ndarray]:
        """The assembled PSD slack matrices at x (feasible iff all PSD)."""
        mats = []
        for blk in self.program().blocks:
            if blk.kind == PSD:
                mats.append(smat(blk.h - blk.g @ np.asarray(x), blk.side))
        return mats


class _SymConstraint:
    """Assemble an affine symmetric matrix S(x) >= 0 into a PSD block.

    Callers describe every entry of the full matrix (mirrored positions
    included); the scaled-vectorization bookkeeping lives here.
    """

    def __init__(self, builder: ProgramBuilder, side: int):
        self.side = side
        self.handle: BlockHandle = builder.add_block(PSD, svec_dim(side), side=side)
        i, j = svec_indices(side)
        rank = np.zeros((side, side), dtype=int)
        rank[i, j] = np.arange(i.size)
        rank[j, i] = rank[i, j]
        self._rank = rank
        w = np.full((side, side), 1.0 / np.sqrt(2.0))
        np.fill_diagonal(w, 1.0)
        self._w = w

    def vars(self, rows, cols, var_idx, coef) -> None:
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        rows, cols, var_idx, coef = np.broadcast_arrays(rows, cols, var_idx, coef)
        svec_rows = self._rank[rows, cols]
        weights = self._w[rows, cols]
        # s = h - Gx must equal svec(S(x)), so G carries -coef
        self.handle.add_g_many(svec_rows, var_idx, -np.asarray(coef) * weights)

    def const(self, rows, cols, vals) -> None:
        rows, cols, vals = np.broadcast_arrays(np.asarray(rows), np.asarray(cols), vals)
        svec_rows = self._rank[rows, cols]
        weights = self._w[rows, cols]
        blk = self.handle._blk
        np.add.at(blk["h"], svec_rows, np.asarray(vals, dtype=float) * weights)


def _place_ap(cb: _SymConstraint, r0: int, c0: int, a: np.ndarray,
              p_idx: np.ndarray, scale: float = 1.0, transpose: bool = False) -> None:
    """Place scale*(A @ P) at (r0, c0); transpose places scale*(A @ P)'."""
    n = p_idx.shape[0]
    cols = np.arange(n)
    rr, tt = np.nonzero(a)
    for r, t in zip(rr, tt):
        v = scale * a[r, t]
        vars_ = p_idx[t, :]
        if transpose:
            cb.vars(r0 + cols, c0 + r, vars_, v)
        else:
            cb.vars(r0 + r, c0 + cols, vars_, v)


def _place_by(cb: _SymConstraint, r0: int, c0: int, b: np.ndarray,
              y_idx: np.ndarray, scale: float = 1.0, transpose: bool = False) -> None:
    """Place scale*(B @ Y) at (r0, c0); transpose places scale*(B @ Y)'."""
    n = y_idx.shape[1]
    cols = np.arange(n)
    rr, jj = np.nonzero(b)
    for r, j in zip(rr, jj):
        v = scale * b[r, j]
        vars_ = y_idx[j, :]
        if transpose:
            cb.vars(r0 + cols, c0 + r, vars_, v)
        else:
            cb.vars(r0 + r, c0 + cols, vars_, v)


def _place_var_matrix(cb: _SymConstraint, r0: int, c0: int, idx: np.ndarray,
                      scale: float = 1.0, transpose: bool = False) -> None:
    rows, cols = np.indices(idx.shape)
    rows, cols, flat = rows.ravel(), cols.ravel(), idx.ravel()
    if transpose:
        cb.vars(r0 + cols, c0 + rows, flat, scale)
    else:
        cb.vars(r0 + rows, c0 + cols, flat, scale)


def _place_const(cb: _SymConstraint, r0: int, c0: int, mat: np.ndarray) -> None:
    rows, cols = np.indices(mat.shape)
    cb.const(r0 + rows.ravel(), c0 + cols.ravel(), mat.ravel())


def _sym_vars(builder: ProgramBuilder, side: int) -> np.ndarray:
    count = svec_dim(side)
    rng = builder.add_vars(count)
    idx = np.zeros((side, side), dtype=int)
    i, j = svec_indices(side)
    idx[i, j] = np.arange(rng.start, rng.stop)
    idx[j, i] = idx[i, j]
    return idx


def _full_vars(builder: ProgramBuilder, rows: int, cols: int) -> np.ndarray:
    rng = builder.add_vars(rows * cols)
    return np.arange(rng.start, rng.stop).reshape(rows, cols)


def _channel_column(cb: _SymConstraint, sys: StochasticSystem, p_idx, y_idx,
                    r0: int, c0: int, ch, sign: float) -> None:
    """One block column of Z and its mirror: sign*c*(P A_i' + Y'B_i')."""
    c = float(ch.intensity)
    if ch.state_matrix is not None:
        _place_ap(cb, r0, c0, ch.state_matrix, p_idx, scale=sign * c, transpose=True)
        _place_ap(cb, c0, r0, ch.state_matrix, p_idx, scale=sign * c, transpose=False)
    if ch.input_matrix is not None:
        _place_by(cb, r0, c0, ch.input_matrix, y_idx, scale=sign * c, transpose=True)
        _place_by(cb, c0, r0, ch.input_matrix, y_idx, scale=sign * c, transpose=False)


def _channel_column_dt(cb: _SymConstraint, sys: StochasticSystem, p_idx, y_idx,
                       r0: int, c0: int, ch) -> None:
    """One discrete noise column c*(A_i P + B_i Y) placed at (c0, r0) with
    its transpose mirrored at (r0, c0)."""
    c = float(ch.intensity)
    if ch.state_matrix is not None:
        _place_ap(cb, c0, r0, ch.state_matrix, p_idx, scale=c, transpose=False)
        _place_ap(cb, r0, c0, ch.state_matrix, p_idx, scale=c, transpose=True)
    if ch.input_matrix is not None:
        _place_by(cb, c0, r0, ch.input_matrix, y_idx, scale=c, transpose=False)
        _place_by(cb, r0, c0, ch.input_matrix, y_idx, scale=c, transpose=True)


def _require_domain(sys: StochasticSystem, domain: str, what: str) -> None:
    validate(sys)
    if sys.time_domain != domain:
        raise LmiError(f"{what} requires a {domain}-time system, "
                       f"got {sys.time_domain}")


def build_stability_lmi_ct(sys: StochasticSystem, eps: float | None = None) -> LmiHandle:
    """Continuous-time mean-square stabilization LMI over (P, Y)."""
    _require_domain(sys, CONTINUOUS, "build_stability_lmi_ct")
    eps = default_eps(sys) if eps is None else float(eps)
    builder = ProgramBuilder()
    n, m = sys.n, sys.m
    q = len(sys.channels)
    p_idx = _sym_vars(builder, n)
    y_idx = _full_vars(builder, m, n)

    side = n * (1 + q)
    big = _SymConstraint(builder, side)
    # S = -[A0 P + P A0' + B0 Y + Y'B0'] - eps I on the leading block
    _place_ap(big, 0, 0, sys.a0, p_idx, scale=-1.0, transpose=False)
    _place_ap(big, 0, 0, sys.a0, p_idx, scale=-1.0, transpose=True)
    _place_by(big, 0, 0, sys.b0, y_idx, scale=-1.0, transpose=False)
    _place_by(big, 0, 0, sys.b0, y_idx, scale=-1.0, transpose=True)
    for k, ch in enumerate(sys.channels):
        off = n * (1 + k)
        _channel_column(big, sys, p_idx, y_idx, 0, off, ch, sign=-1.0)
        _place_var_matrix(big, off, off, p_idx, scale=1.0)  # -Z_P block = +P
        _place_const(big, off, off, -eps * np.eye(n))
    _place_const(big, 0, 0, -eps * np.eye(n))

    pblk = _SymConstraint(builder, n)
    _place_var_matrix(pblk, 0, 0, p_idx)
    _place_const(pblk, 0, 0, -eps * np.eye(n))

    return LmiHandle(builder=builder, sys=sys, eps=eps, p_index=p_idx,
                     y_index=y_idx, psd_block_sides=(side, n))


def build_stability_lmi_dt(sys: StochasticSystem, eps: float | None = None) -> LmiHandle:
    """Discrete-time mean-square stabilization LMI over (P, Y)."""
    _require_domain(sys, DISCRETE, "build_stability_lmi_dt")
    eps = default_eps(sys) if eps is None else float(eps)
    builder = ProgramBuilder()
    n, m = sys.n, sys.m
    q = len(sys.channels)
    p_idx = _sym_vars(builder, n)
    y_idx = _full_vars(builder, m, n)

    side = n * (2 + q)
    big = _SymConstraint(builder, side)
    _place_var_matrix(big, 0, 0, p_idx)
    _place_const(big, 0, 0, -eps * np.eye(n))
    # (0, n) block A0 P + B0 Y with its mirror
    _place_ap(big, 0, n, sys.a0, p_idx)
    _place_ap(big, n, 0, sys.a0, p_idx, transpose=True)
    _place_by(big, 0, n, sys.b0, y_idx)
    _place_by(big, n, 0, sys.b0, y_idx, transpose=True)
    _place_var_matrix(big, n, n, p_idx)
    _place_const(big, n, n, -eps * np.eye(n))
    for k, ch in enumerate(sys.channels):
        off = n * (2 + k)
        _channel_column_dt(big, sys, p_idx, y_idx, off, 0, ch)
        _place_var_matrix(big, off, off, p_idx)
        _place_const(big, off, off, -eps * np.eye(n))

    return LmiHandle(builder=builder, sys=sys, eps=eps, p_index=p_idx,
                     y_index=y_idx, psd_block_sides=(side,))


def _check_weights(sys: StochasticSystem, q: np.ndarray, r: np.ndarray):
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    if q.shape != (sys.n, sys.n):
        raise LmiError(f"Q must be {sys.n}x{sys.n}, got {q.shape}")
    if r.shape != (sys.m, sys.m):
        raise LmiError(f"R must be {sys.m}x{sys.m}, got {r.shape}")
    try:
        q_inv = pd_inverse(q)
        r_inv = pd_inverse(r)
    except Exception as exc:
        raise LmiError(f"Q and R must be well-conditioned positive definite: {exc}")
    return q_inv, r_inv


def _add_cost_slacks(builder: ProgramBuilder, sys: StochasticSystem, p_idx):
    """Pi/kappa variables with Tr(Pi) <= kappa and [[Pi, S0h],[S0h, P]] >= 0."""
    n = sys.n
    pi_idx = _sym_vars(builder, n)
    kappa = builder.add_vars(1).start
    tr_blk = builder.add_block(NONNEG, 1)
    for i in range(n):
        tr_blk.add_g(0, int(pi_idx[i, i]), 1.0)
    tr_blk.add_g(0, kappa, -1.0)

    s0h = sym_sqrt(sys.sigma0)
    couple = _SymConstraint(builder, 2 * n)
    _place_var_matrix(couple, 0, 0, pi_idx)
    _place_const(couple, 0, n, s0h)
    _place_const(couple, n, 0, s0h)
    _place_var_matrix(couple, n, n, p_idx)
    builder.add_objective(kappa, 1.0)
    return pi_idx, kappa


def build_lqrm_sdp_ct(sys: StochasticSystem, q: np.ndarray, r: np.ndarray,
                      eps: float | None = None) -> LmiHandle:
    """Continuous-time cost-bound SDP: minimize kappa over (P, Y, Pi, kappa).

    The stability block gains Y' and P block columns against -R^{-1} and
    -Q^{-1}; kappa upper-bounds Tr(Sigma0 P^{-1}) and hence the true
    closed-loop quadratic cost of K = Y P^{-1}.
    """
    _require_domain(sys, CONTINUOUS, "build_lqrm_sdp_ct")
    q_inv, r_inv = _check_weights(sys, q, r)
    eps = default_eps(sys) if eps is None else float(eps)
    builder = ProgramBuilder()
    n, m = sys.n, sys.m
    nch = len(sys.channels)
    p_idx = _sym_vars(builder, n)
    y_idx = _full_vars(builder, m, n)

    side = n * (1 + nch) + m + n
    big = _SymConstraint(builder, side)
    _place_ap(big, 0, 0, sys.a0, p_idx, scale=-1.0)
    _place_ap(big, 0, 0, sys.a0, p_idx, scale=-1.0, transpose=True)
    _place_by(big, 0, 0, sys.b0, y_idx, scale=-1.0)
    _place_by(big, 0, 0, sys.b0, y_idx, scale=-1.0, transpose=True)
    _place_const(big, 0, 0, -eps * np.eye(n))
    for k, ch in enumerate(sys.channels):
        off = n * (1 + k)
        _channel_column(big, sys, p_idx, y_idx, 0, off, ch, sign=-1.0)
        _place_var_matrix(big, off, off, p_idx)
        _place_const(big, off, off, -eps * np.eye(n))
    off_y = n * (1 + nch)
    _place_var_matrix(big, 0, off_y, y_idx, scale=-1.0, transpose=True)  # -Y'
    _place_var_matrix(big, off_y, 0, y_idx, scale=-1.0)                  # -Y
    _place_const(big, off_y, off_y, r_inv - eps * np.eye(m))
    off_p = off_y + m
    _place_var_matrix(big, 0, off_p, p_idx, scale=-1.0)
    _place_var_matrix(big, off_p, 0, p_idx, scale=-1.0)
    _place_const(big, off_p, off_p, q_inv - eps * np.eye(n))

    pblk = _SymConstraint(builder, n)
    _place_var_matrix(pblk, 0, 0, p_idx)
    _place_const(pblk, 0, 0, -eps * np.eye(n))

    pi_idx, kappa = _add_cost_slacks(builder, sys, p_idx)
    return LmiHandle(builder=builder, sys=sys, eps=eps, p_index=p_idx,
                     y_index=y_idx, pi_index=pi_idx, kappa_index=kappa,
                     psd_block_sides=(side, n, 2 * n))


def build_lqrm_sdp_dt(sys: StochasticSystem, q: np.ndarray, r: np.ndarray,
                      eps: float | None = None) -> LmiHandle:
    """Discrete-time cost-bound SDP.

    Uses the orientation whose Schur complement gives the supersolution
    inequality in X = P^{-1} (transposed drift/noise columns, Y against
    R^{-1}, P against Q^{-1}), which certifies kappa as a true cost upper
    bound; block side n(2+q)+m+n.
    """
    _require_domain(sys, DISCRETE, "build_lqrm_sdp_dt")
    q_inv, r_inv = _check_weights(sys, q, r)
    eps = default_eps(sys) if eps is None else float(eps)
    builder = ProgramBuilder()
    n, m = sys.n, sys.m
    nch = len(sys.channels)
    p_idx = _sym_vars(builder, n)
    y_idx = _full_vars(builder, m, n)

    side = n * (2 + nch) + m + n
    big = _SymConstraint(builder, side)
    _place_var_matrix(big, 0, 0, p_idx)
    _place_const(big, 0, 0, -eps * np.eye(n))
    # cost-sound orientation: (n, 0) holds A0 P + B0 Y
    _place_ap(big, n, 0, sys.a0, p_idx)
    _place_ap(big, 0, n, sys.a0, p_idx, transpose=True)
    _place_by(big, n, 0, sys.b0, y_idx)
    _place_by(big, 0, n, sys.b0, y_idx, transpose=True)
    _place_var_matrix(big, n, n, p_idx)
    _place_const(big, n, n, -eps * np.eye(n))
    for k, ch in enumerate(sys.channels):
        off = n * (2 + k)
        _channel_column_dt(big, sys, p_idx, y_idx, 0, off, ch)
        _place_var_matrix(big, off, off, p_idx)
        _place_const(big, off, off, -eps * np.eye(n))
    off_y = n * (2 + nch)
    _place_var_matrix(big, off_y, 0, y_idx)                      # Y at (off_y, 0)
    _place_var_matrix(big, 0, off_y, y_idx, transpose=True)      # Y'
    _place_const(big, off_y, off_y, r_inv - eps * np.eye(m))
    off_p = off_y + m
    _place_var_matrix(big, off_p, 0, p_idx)
    _place_var_matrix(big, 0, off_p, p_idx)
    _place_const(big, off_p, off_p, q_inv - eps * np.eye(n))

    pi_idx, kappa = _add_cost_slacks(builder, sys, p_idx)
    return LmiHandle(builder=builder, sys=sys, eps=eps, p_index=p_idx,
                     y_index=y_idx, pi_index=pi_idx, kappa_index=kappa,
                     psd_block_sides=(side, 2 * n))


def add_regularizer(handle: LmiHandle, spec: RegularizerSpec) -> LmiHandle:
    """Return a new handle whose objective gains gamma * ||Y||_spec."""
    if spec.kind == NONE or spec.gamma == 0.0:
        return replace(handle, regularizer=spec)
    builder = handle.builder.clone()
    y_idx = handle.y_index
    m, n = y_idx.shape
    gamma = float(spec.gamma)

    def abs_bounds(bound_idx: np.ndarray) -> None:
        # |Y_ij| <= bound for every entry; bound_idx broadcasts against Y
        blk = builder.add_block(NONNEG, 2 * m * n)
        row = 0
        for i in range(m):
            for j in range(n):
                b = int(bound_idx[i, j])
                yv = int(y_idx[i, j])
                blk.add_g(row, b, -1.0)
                blk.add_g(row, yv, 1.0)
                blk.add_g(row + 1, b, -1.0)
                blk.add_g(row + 1, yv, -1.0)
                row += 2

    def group_socs(row_groups: bool, t_idx: np.ndarray) -> None:
        count = m if row_groups else n
        size = (n if row_groups else m) + 1
        for g in range(count):
            blk = builder.add_block(SOC, size)
            blk.add_g(0, int(t_idx[g]), -1.0)
            members = y_idx[g, :] if row_groups else y_idx[:, g]
            for pos, yv in enumerate(members):
                blk.add_g(pos + 1, int(yv), -1.0)

    if spec.kind in (ROW_NORM, COL_NORM):
        rows = spec.kind == ROW_NORM
        count = m if rows else n
        t_rng = builder.add_vars(count)
        t = np.arange(t_rng.start, t_rng.stop)
        bound = np.broadcast_to(t[:, None] if rows else t[None, :], (m, n))
        abs_bounds(bound)
        for tv in t:
            builder.add_objective(int(tv), gamma)
    elif spec.kind in (ROW_GROUP_LASSO, COL_GROUP_LASSO):
        rows = spec.kind == ROW_GROUP_LASSO
        count = m if rows else n
        t_rng = builder.add_vars(count)
        t = np.arange(t_rng.start, t_rng.stop)
        group_socs(rows, t)
        for tv in t:
            builder.add_objective(int(tv), gamma)
    else:
        rows = spec.kind == ROW_SPARSE_GROUP_LASSO
        s_idx = _full_vars(builder, m, n)
        abs_bounds(s_idx)
        count = m if rows else n
        t_rng = builder.add_vars(count)
        t = np.arange(t_rng.start, t_rng.stop)
        group_socs(rows, t)
        for sv in s_idx.ravel():
            builder.add_objective(int(sv), gamma * (1.0 - spec.mu))
        for tv in t:
            builder.add_objective(int(tv), gamma * spec.mu)

    return replace(handle, builder=builder, regularizer=spec)


def add_zero_column_constraints(handle: LmiHandle, zero_columns) -> LmiHandle:
    """Pin the listed columns of Y to zero (output-feedback phase 2)."""
    cols = sorted(set(int(c) for c in zero_columns))
    if not cols:
        return handle
    n = handle.y_index.shape[1]
    for c in cols:
        if not 0 <= c < n:
            raise LmiError(f"zero-column index {c} out of range [0, {n})")
    builder = handle.builder.clone()
    for c in cols:
        for yv in handle.y_index[:, c]:
            builder.add_equality([int(yv)], [1.0], 0.0)
    return replace(handle, builder=builder)
