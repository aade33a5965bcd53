"""Standard-form conic programs over zero/nonneg/SOC/PSD cones.

A program is

    minimize    c' x
    subject to  A x = b
                s_k = h_k - G_k x  in  K_k   for every cone block k

with K_k one of the zero cone, the nonnegative orthant, a second-order
cone, or a PSD cone. PSD blocks live in the scaled symmetric
vectorization: a side-d matrix becomes the length d(d+1)/2 vector of its
upper triangle (row-major, i <= j) with off-diagonal entries multiplied
by sqrt(2), which preserves inner products.

Solving goes through cvxopt's Nesterov-Todd scaled primal-dual interior
point method (conelp). Problems with large PSD blocks switch to a custom
Schur-complement KKT solver that exploits the few-nonzeros-per-column
structure typical of LMI constraint matrices; small problems keep
cvxopt's stock factorization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .numerics import sym

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"
PSD = "psd"

_SQRT2 = float(np.sqrt(2.0))

# Above this total full-storage PSD dimension the custom Schur KKT solver
# beats cvxopt's QR-based default by a wide margin.
_BIG_PSD_FULLDIM = 40_000


class ConicError(RuntimeError):
    """Raised for malformed programs or solver-level failures."""


def svec_indices(side: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/col indices (i <= j, row-major) of the scaled upper triangle."""
    return np.triu_indices(side)


def svec_weights(side: int) -> np.ndarray:
    i, j = svec_indices(side)
    return np.where(i == j, 1.0, _SQRT2)


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled vectorization of a symmetric matrix (sqrt2 off-diagonals)."""
    i, j = svec_indices(m.shape[0])
    return m[i, j] * svec_weights(m.shape[0])


def smat(v: np.ndarray, side: int) -> np.ndarray:
    """Inverse of svec."""
    i, j = svec_indices(side)
    vals = np.asarray(v, dtype=float) / svec_weights(side)
    m = np.zeros((side, side))
    m[i, j] = vals
    m[j, i] = vals
    return m


def svec_dim(side: int) -> int:
    return side * (side + 1) // 2


@dataclass(frozen=True)
class ConeBlock:
    """One cone constraint s = h - G x in K."""

    kind: str
    size: int
    g: sp.csr_matrix
    h: np.ndarray
    side: int | None = None  # PSD matrix side; None for other cones

    def __post_init__(self):
        if self.kind not in (ZERO, NONNEG, SOC, PSD):
            raise ConicError(f"unknown cone kind {self.kind!r}")
        if self.kind == PSD and (self.side is None or svec_dim(self.side) != self.size):
            raise ConicError("PSD block size must be side*(side+1)/2")
        if self.g.shape[0] != self.size or self.h.shape[0] != self.size:
            raise ConicError("block G/h rows must match the block size")


@dataclass(frozen=True)
class ConicProgram:
    num_vars: int
    objective: np.ndarray
    eq_a: sp.csr_matrix
    eq_b: np.ndarray
    blocks: tuple[ConeBlock, ...]

    def __post_init__(self):
        if self.objective.shape != (self.num_vars,):
            raise ConicError("objective length must equal num_vars")
        if self.eq_a.shape != (self.eq_b.shape[0], self.num_vars):
            raise ConicError("equality dimensions inconsistent")
        for blk in self.blocks:
            if blk.g.shape[1] != self.num_vars:
                raise ConicError("block G column count must equal num_vars")


@dataclass(frozen=True)
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | maxIters | numericalFailure
    x: np.ndarray
    objective_value: float
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int = 0
    solve_seconds: float = 0.0
    message: str = ""


@dataclass(frozen=True)
class ResidualReport:
    equality_residual: float
    cone_distances: tuple[float, ...]
    objective_value: float

    @property
    def max_violation(self) -> float:
        worst = self.equality_residual
        if self.cone_distances:
            worst = max(worst, max(self.cone_distances))
        return worst


@dataclass
class SolverSettings:
    """Solve controls. The interior-point method terminates on tolerances;
    ``max_iters`` is a hard upper bound on iteration work."""

    tolerance: float = 1e-8
    max_iters: int = 50_000
    verbose: bool = False


class BlockHandle:
    """Write access to one cone block while building (s = h - G x)."""

    def __init__(self, blk: dict):
        self._blk = blk

    def add_g(self, row: int, var: int, coef: float) -> None:
        self._blk["rows"].append(int(row))
        self._blk["cols"].append(int(var))
        self._blk["vals"].append(float(coef))

    def add_g_many(self, rows, vars_, coefs) -> None:
        self._blk["rows"].extend(int(r) for r in rows)
        self._blk["cols"].extend(int(v) for v in vars_)
        self._blk["vals"].extend(float(c) for c in coefs)

    def add_h(self, row: int, val: float) -> None:
        self._blk["h"][row] += val


class ProgramBuilder:
    """Incremental triplet-based assembly of a ConicProgram."""

    def __init__(self):
        self.num_vars = 0
        self._obj: dict[int, float] = {}
        self._eq_rows: list[tuple[list[int], list[float], float]] = []
        self._blocks: list[dict] = []

    def clone(self) -> "ProgramBuilder":
        dup = ProgramBuilder()
        dup.num_vars = self.num_vars
        dup._obj = dict(self._obj)
        dup._eq_rows = [(list(v), list(c), r) for v, c, r in self._eq_rows]
        dup._blocks = [
            {"kind": b["kind"], "size": b["size"], "side": b["side"],
             "rows": list(b["rows"]), "cols": list(b["cols"]),
             "vals": list(b["vals"]), "h": b["h"].copy()}
            for b in self._blocks
        ]
        return dup

    def add_vars(self, count: int) -> range:
        start = self.num_vars
        self.num_vars += count
        return range(start, start + count)

    def add_objective(self, var: int, coef: float) -> None:
        self._obj[var] = self._obj.get(var, 0.0) + coef

    def add_equality(self, vars_, coefs, rhs: float) -> None:
        self._eq_rows.append(([int(v) for v in vars_],
                              [float(c) for c in coefs], float(rhs)))

    def add_block(self, kind: str, size: int, side: int | None = None) -> BlockHandle:
        blk = {"kind": kind, "size": size, "side": side,
               "rows": [], "cols": [], "vals": [], "h": np.zeros(size)}
        self._blocks.append(blk)
        return BlockHandle(blk)

    def build(self) -> ConicProgram:
        c = np.zeros(self.num_vars)
        for idx, coef in self._obj.items():
            c[idx] = coef
        rows, cols, vals, b = [], [], [], []
        for r, (vs, cf, rhs) in enumerate(self._eq_rows):
            rows.extend([r] * len(vs))
            cols.extend(vs)
            vals.extend(cf)
            b.append(rhs)
        eq_a = sp.csr_matrix((vals, (rows, cols)),
                             shape=(len(self._eq_rows), self.num_vars))
        blocks = []
        for blk in self._blocks:
            g = sp.csr_matrix((blk["vals"], (blk["rows"], blk["cols"])),
                              shape=(blk["size"], self.num_vars))
            blocks.append(ConeBlock(kind=blk["kind"], size=blk["size"], g=g,
                                    h=blk["h"].copy(), side=blk["side"]))
        return ConicProgram(self.num_vars, c, eq_a, np.array(b), tuple(blocks))


def cone_distance(block: ConeBlock, s: np.ndarray) -> float:
    """How far the slack s is from the block's cone (0 when inside)."""
    if block.kind == ZERO:
        return float(np.max(np.abs(s), initial=0.0))
    if block.kind == NONNEG:
        return float(max(0.0, -np.min(s, initial=0.0)))
    if block.kind == SOC:
        tail = float(np.linalg.norm(s[1:])) if s.shape[0] > 1 else 0.0
        return float(max(0.0, tail - s[0]))
    lam_min = float(np.linalg.eigvalsh(smat(s, block.side))[0])
    return float(max(0.0, -lam_min))


def check_solution(program: ConicProgram, x: np.ndarray) -> ResidualReport:
    """Recompute feasibility residuals and objective from scratch.

    Uses only the program data (never solver state), so it doubles as an
    independent audit of any claimed solution.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (program.num_vars,):
        raise ConicError(f"x has shape {x.shape}, expected ({program.num_vars},)")
    eq_res = 0.0
    if program.eq_b.shape[0]:
        eq_res = float(np.max(np.abs(program.eq_a @ x - program.eq_b)))
    dists = tuple(cone_distance(blk, blk.h - blk.g @ x) for blk in program.blocks)
    return ResidualReport(equality_residual=eq_res, cone_distances=dists,
                          objective_value=float(program.objective @ x))


# ---------------------------------------------------------------------------
# cvxopt backend


def _expand_psd_block(g: sp.csr_matrix, h: np.ndarray, side: int):
    """Convert an svec-form PSD block to cvxopt full column-major storage."""
    coo = g.tocoo()
    i, j = svec_indices(side)
    diag = i == j
    rows_a = i + j * side
    rows_b = j + i * side
    w = np.where(diag, 1.0, 1.0 / _SQRT2)
    r1 = rows_a[coo.row]
    r2 = rows_b[coo.row]
    vals = coo.data * w[coo.row]
    dup = ~diag[coo.row]
    rows = np.concatenate([r1, r2[dup]])
    cols = np.concatenate([coo.col, coo.col[dup]])
    data = np.concatenate([vals, vals[dup]])
    g_full = sp.coo_matrix((data, (rows, cols)), shape=(side * side, g.shape[1]))
    h_full = smat(h, side).flatten(order="F")
    return g_full.tocsr(), h_full


def _soc_winv(beta: float, v: np.ndarray) -> np.ndarray:
    """Inverse NT scaling matrix of one second-order cone block."""
    jv = v.copy()
    jv[1:] *= -1.0
    mat = 2.0 * np.outer(jv, jv)
    mat[0, 0] -= 1.0
    mat[1:, 1:] += np.eye(v.size - 1)
    return mat / beta


def _soc_w(beta: float, v: np.ndarray) -> np.ndarray:
    """Forward NT scaling matrix beta*(2vv' - J) of one SOC block."""
    mat = 2.0 * np.outer(v, v)
    mat[0, 0] -= 1.0
    mat[1:, 1:] += np.eye(v.size - 1)
    return mat * beta


class _SchurKkt:
    """Custom conelp KKT solver for programs dominated by large PSD blocks.

    Assembles the dense Schur complement H = G' (W'W)^{-1} G column by
    column, exploiting that each variable touches only a handful of
    entries per PSD block; solves, given the NT scaling W,

        [ 0  A'  G'*W^{-1} ] [ux]   [bx]
        [ A  0   0         ] [uy] = [by]
        [ G  0   -W'       ] [uz]   [bz]

    and returns W*uz in the z slot as conelp expects.
    """

    def __init__(self, nonneg_g: sp.csr_matrix, soc_gs: list[np.ndarray],
                 psd_blocks: list[tuple[sp.csr_matrix, int]],
                 eq_a: np.ndarray | None):
        self.n = nonneg_g.shape[1]
        self.l_g = nonneg_g
        self.q_gs = soc_gs
        self.eq_a = eq_a
        self.p = 0 if eq_a is None else eq_a.shape[0]
        self.psd = []
        for g, side in psd_blocks:
            gc = g.tocsc()
            i, j = svec_indices(side)
            wgt = svec_weights(side)
            cols = []
            for var in range(self.n):
                lo, hi = gc.indptr[var], gc.indptr[var + 1]
                if lo == hi:
                    cols.append(None)
                    continue
                rows = gc.indices[lo:hi]
                vals = gc.data[lo:hi] / wgt[rows]
                p_idx, q_idx = i[rows], j[rows]
                off = p_idx != q_idx
                # entrywise description of the full symmetric matrix U_var
                pp = np.concatenate([p_idx, q_idx[off]])
                qq = np.concatenate([q_idx, p_idx[off]])
                vv = np.concatenate([vals, vals[off]])
                cols.append((pp, qq, vv))
            self.psd.append({"side": side, "gsvec_t": gc.T.tocsr(),
                             "cols": cols, "i": i, "j": j, "w": wgt})

    def factor(self, w):
        n = self.n
        h = np.zeros((n, n))
        if self.l_g.shape[0]:
            gl = sp.diags(np.asarray(w["di"]).ravel()) @ self.l_g
            h += (gl.T @ gl).toarray()
        for gq, beta, v in zip(self.q_gs, w["beta"], w["v"]):
            gq_s = _soc_winv(float(beta), np.asarray(v).ravel()) @ gq
            h += gq_s.T @ gq_s
        for blk, rti in zip(self.psd, w["rti"]):
            rti = np.asarray(rti)
            m = rti @ rti.T
            i, j, wgt, gsvec_t = blk["i"], blk["j"], blk["w"], blk["gsvec_t"]
            for var, entry in enumerate(blk["cols"]):
                if entry is None:
                    continue
                pp, qq, vv = entry
                z = (m[:, pp] * vv) @ m[:, qq].T
                h[:, var] += gsvec_t @ (z[i, j] * wgt)
        if self.p:
            kkt = np.zeros((n + self.p, n + self.p))
            kkt[:n, :n] = h
            kkt[:n, n:] = self.eq_a.T
            kkt[n:, :n] = self.eq_a
        else:
            kkt = h
        # factor as-is; only a genuinely singular factorization gets retried
        # with an escalating Tikhonov shift (refinement absorbs the bias)
        scale = float(np.max(np.abs(kkt))) or 1.0
        lu = None
        for shift in (0.0, 1e-14 * scale, 1e-10 * scale):
            try:
                with np.errstate(all="ignore"):
                    cand = scipy.linalg.lu_factor(
                        kkt + shift * np.eye(kkt.shape[0]) if shift else kkt)
            except (scipy.linalg.LinAlgError, ValueError):
                continue
            if np.all(np.isfinite(cand[0])) and np.all(np.abs(np.diag(cand[0])) > 0.0):
                lu = cand
                break
        if lu is None:
            raise ArithmeticError("singular KKT system")
        self._lu = lu
        self._w = w
        return self._solve

    def _apply_winv(self, z: np.ndarray, transpose: bool) -> np.ndarray:
        """W^{-T} z (transpose=True, tolerates garbage upper triangles in
        PSD parts) or W^{-1} z (transpose=False, symmetric input)."""
        out = np.empty_like(z)
        ml = self.l_g.shape[0]
        if ml:
            out[:ml] = np.asarray(self._w["di"]).ravel() * z[:ml]
        pos = ml
        for gq, beta, v in zip(self.q_gs, self._w["beta"], self._w["v"]):
            dim = gq.shape[0]
            winv = _soc_winv(float(beta), np.asarray(v).ravel())
            out[pos:pos + dim] = winv @ z[pos:pos + dim]
            pos += dim
        for blk, rti in zip(self.psd, self._w["rti"]):
            side = blk["side"]
            u = z[pos:pos + side * side].reshape((side, side), order="F")
            u = np.tril(u) + np.tril(u, -1).T
            rti = np.asarray(rti)
            v_out = rti.T @ u @ rti if transpose else rti @ u @ rti.T
            out[pos:pos + side * side] = v_out.flatten(order="F")
            pos += side * side
        return out

    def _gt(self, z: np.ndarray) -> np.ndarray:
        """G' z with z in the composite full-storage layout."""
        res = np.zeros(self.n)
        ml = self.l_g.shape[0]
        if ml:
            res += self.l_g.T @ z[:ml]
        pos = ml
        for gq in self.q_gs:
            res += gq.T @ z[pos:pos + gq.shape[0]]
            pos += gq.shape[0]
        for blk in self.psd:
            side = blk["side"]
            u = z[pos:pos + side * side].reshape((side, side), order="F")
            res += blk["gsvec_t"] @ (sym(u)[blk["i"], blk["j"]] * blk["w"])
            pos += side * side
        return res

    def _gx(self, x: np.ndarray) -> np.ndarray:
        """G x in the composite full-storage layout."""
        parts = []
        if self.l_g.shape[0]:
            parts.append(self.l_g @ x)
        for gq in self.q_gs:
            parts.append(gq @ x)
        for blk in self.psd:
            u = smat(blk["gsvec_t"].T @ x, blk["side"])
            parts.append(u.flatten(order="F"))
        return np.concatenate(parts) if parts else np.zeros(0)

    def _reduced_solve(self, bx, by, bz):
        """One pass of the Schur reduction for rhs (bx, by, bz)."""
        bz_hat = self._apply_winv(bz, transpose=True)
        rhs = bx + self._gt(self._apply_winv(bz_hat, transpose=False))
        if self.p:
            sol = scipy.linalg.lu_solve(self._lu, np.concatenate([rhs, by]))
            ux, uy = sol[:self.n], sol[self.n:]
        else:
            ux = scipy.linalg.lu_solve(self._lu, rhs)
            uy = by[:0]
        v = self._apply_winv(self._gx(ux) - bz, transpose=True)  # = W uz
        return ux, uy, v

    def _residual(self, bx, by, bz, ux, uy, v):
        r1 = bx - self._gt(self._apply_winv(v, transpose=False))
        if self.p:
            r1 = r1 - self.eq_a.T @ uy
            r2 = by - self.eq_a @ ux
        else:
            r2 = by[:0]
        r3 = bz - self._gx(ux) + self._apply_wt(v)
        size = max(np.max(np.abs(r1), initial=0.0),
                   np.max(np.abs(r2), initial=0.0),
                   np.max(np.abs(r3), initial=0.0))
        return size, (r1, r2, r3)

    def _solve(self, x, y, z):
        from cvxopt import matrix

        bx = np.array(x).ravel()
        by = np.array(y).ravel()
        bz = np.array(z).ravel()
        # PSD parts of bz may carry garbage upper triangles; canonicalize once
        # so refinement residuals are computed against a fixed rhs.
        bz = self._symmetrize_psd(bz)
        scale = 1.0 + max(np.max(np.abs(bx), initial=0.0),
                          np.max(np.abs(bz), initial=0.0))
        ux, uy, v = self._reduced_solve(bx, by, bz)
        # monitored fixed-precision refinement on the 3x3 system recovers the
        # digits lost to the squared conditioning of the Schur complement;
        # keep the best iterate and stop as soon as a round fails to contract
        best_res, parts = self._residual(bx, by, bz, ux, uy, v)
        best = (ux, uy, v)
        for _ in range(4):
            if best_res < 1e-13 * scale:
                break
            dx, dy, dv = self._reduced_solve(*parts)
            cand = (best[0] + dx, best[1] + dy, best[2] + dv)
            res, new_parts = self._residual(bx, by, bz, *cand)
            if not np.isfinite(res) or res >= 0.9 * best_res:
                break
            best, best_res, parts = cand, res, new_parts
        if not np.isfinite(best_res) or best_res > 1e-2 * scale:
            # the factorization no longer approximates the KKT operator;
            # let conelp stop cleanly with its current iterate
            raise ArithmeticError(
                f"KKT refinement stalled at residual {best_res:.2e}")
        ux, uy, v = best
        x[:] = matrix(ux)
        if self.p:
            y[:] = matrix(uy)
        z[:] = matrix(v)

    def _symmetrize_psd(self, z: np.ndarray) -> np.ndarray:
        out = z.copy()
        pos = self.l_g.shape[0] + sum(gq.shape[0] for gq in self.q_gs)
        for blk in self.psd:
            side = blk["side"]
            u = out[pos:pos + side * side].reshape((side, side), order="F")
            u = np.tril(u) + np.tril(u, -1).T
            out[pos:pos + side * side] = u.flatten(order="F")
            pos += side * side
        return out

    def _apply_wt(self, v: np.ndarray) -> np.ndarray:
        """W' v for symmetric-storage input."""
        out = np.empty_like(v)
        ml = self.l_g.shape[0]
        if ml:
            out[:ml] = np.asarray(self._w["d"]).ravel() * v[:ml]
        pos = ml
        for gq, beta, vv in zip(self.q_gs, self._w["beta"], self._w["v"]):
            dim = gq.shape[0]
            out[pos:pos + dim] = _soc_w(float(beta), np.asarray(vv).ravel()) @ v[pos:pos + dim]
            pos += dim
        for blk, r in zip(self.psd, self._w["r"]):
            side = blk["side"]
            u = v[pos:pos + side * side].reshape((side, side), order="F")
            r = np.asarray(r)
            out[pos:pos + side * side] = (r @ sym(u) @ r.T).flatten(order="F")
            pos += side * side
        return out


def _equilibrate(program: ConicProgram, passes: int = 2):
    """Ruiz-style scaling that respects the cones.

    Variables get individual column scales; PSD and SOC blocks get one
    uniform row scale each (any positive scalar preserves the cone) and
    nonneg/zero blocks get per-row scales. Returns the scaled program,
    the column scales d (x_original = d * x_scaled), and the objective
    scale f (objective_scaled = f * objective_original(x)).
    """
    n = program.num_vars
    d = np.ones(n)
    block_scale = np.ones(len(program.blocks))
    row_scale_lp = [np.ones(blk.size) if blk.kind in (NONNEG, ZERO) else None
                    for blk in program.blocks]
    eq_scale = np.ones(program.eq_b.shape[0])

    def col_peaks() -> np.ndarray:
        peaks = np.zeros(n)
        for k, blk in enumerate(program.blocks):
            g = blk.g.tocoo()
            if g.nnz:
                vals = np.abs(g.data) * block_scale[k]
                if row_scale_lp[k] is not None:
                    vals = vals * row_scale_lp[k][g.row]
                np.maximum.at(peaks, g.col, vals * d[g.col])
        a = program.eq_a.tocoo()
        if a.nnz:
            np.maximum.at(peaks, a.col, np.abs(a.data) * eq_scale[a.row] * d[a.col])
        return peaks

    for _ in range(passes):
        peaks = col_peaks()
        nz = peaks > 0
        d[nz] /= np.sqrt(peaks[nz])
        for k, blk in enumerate(program.blocks):
            g = blk.g.tocoo()
            if row_scale_lp[k] is not None:
                rows = np.zeros(blk.size)
                if g.nnz:
                    np.maximum.at(rows, g.row,
                                  np.abs(g.data) * d[g.col] * row_scale_lp[k][g.row])
                rows = np.maximum(rows, np.abs(blk.h) * row_scale_lp[k])
                nzr = rows > 0
                row_scale_lp[k][nzr] /= np.sqrt(rows[nzr])
            else:
                raw = float(np.max(np.abs(g.data) * d[g.col], initial=0.0)) \
                    if g.nnz else 0.0
                raw = max(raw, float(np.max(np.abs(blk.h), initial=0.0)))
                cur = block_scale[k] * raw
                if cur > 0:
                    block_scale[k] /= np.sqrt(cur)
        a = program.eq_a.tocoo()
        if a.nnz:
            rows = np.zeros(program.eq_b.shape[0])
            np.maximum.at(rows, a.row, np.abs(a.data) * d[a.col] * eq_scale[a.row])
            rows = np.maximum(rows, np.abs(program.eq_b) * eq_scale)
            nzr = rows > 0
            eq_scale[nzr] /= np.sqrt(rows[nzr])

    blocks = []
    for k, blk in enumerate(program.blocks):
        scale = row_scale_lp[k] if row_scale_lp[k] is not None \
            else np.full(blk.size, block_scale[k])
        g = sp.diags(scale) @ blk.g @ sp.diags(d)
        blocks.append(ConeBlock(blk.kind, blk.size, g.tocsr(), blk.h * scale,
                                side=blk.side))
    eq_a = sp.diags(eq_scale) @ program.eq_a @ sp.diags(d) \
        if program.eq_b.shape[0] else program.eq_a
    c = program.objective * d
    cmax = float(np.max(np.abs(c), initial=0.0))
    f = 1.0 / cmax if cmax > 0 else 1.0
    scaled = ConicProgram(n, c * f, eq_a.tocsr(), program.eq_b * eq_scale,
                          tuple(blocks))
    return scaled, d, f


def _translate(program: ConicProgram):
    """Split blocks by cone for cvxopt; zero blocks fold into equalities.

    Variables appearing in no constraint are pinned to zero when their
    objective coefficient vanishes (the solver needs full column rank);
    an unconstrained variable with a nonzero coefficient makes the
    program unbounded, reported via the returned flag.
    """
    order = {"l": [], "q": [], "s": []}
    eq_rows = [program.eq_a]
    eq_rhs = [program.eq_b]
    for k, blk in enumerate(program.blocks):
        if blk.kind == ZERO:
            eq_rows.append(blk.g)
            eq_rhs.append(blk.h)
        elif blk.kind == NONNEG:
            order["l"].append(k)
        elif blk.kind == SOC:
            order["q"].append(k)
        else:
            order["s"].append(k)

    col_use = np.zeros(program.num_vars, dtype=bool)
    for blk in program.blocks:
        col_use[np.unique(blk.g.tocoo().col)] = True
    col_use[np.unique(program.eq_a.tocoo().col)] = True
    unused = np.flatnonzero(~col_use)
    unbounded = bool(np.any(program.objective[unused] != 0.0))
    if unused.size and not unbounded:
        pin = sp.csr_matrix((np.ones(unused.size), (np.arange(unused.size), unused)),
                            shape=(unused.size, program.num_vars))
        eq_rows.append(pin)
        eq_rhs.append(np.zeros(unused.size))
    return order, sp.vstack(eq_rows).tocsr(), np.concatenate(eq_rhs), unbounded


def _to_cvx_sparse(m: sp.spmatrix):
    from cvxopt import spmatrix

    coo = m.tocoo()
    return spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(),
                    (m.shape[0], m.shape[1]))


def solve(program: ConicProgram, settings: SolverSettings | None = None) -> ConicSolution:
    """Solve the program; status 'optimal' guarantees residuals <= tolerance."""
    from cvxopt import matrix, solvers

    settings = settings or SolverSettings()
    # equilibrate first: badly scaled LMI data otherwise wrecks the KKT
    # conditioning long before the target tolerance
    scaled, col_scale, obj_scale = _equilibrate(program)
    order, eq_a, eq_b, unbounded = _translate(scaled)
    if unbounded:
        return ConicSolution("unbounded", np.full(program.num_vars, np.nan),
                             float("-inf"), float("inf"), float("inf"),
                             float("inf"), 0, 0.0,
                             "objective acts on a variable no constraint touches")

    g_rows, h_parts = [], []
    dims = {"l": 0, "q": [], "s": []}
    for k in order["l"]:
        g_rows.append(scaled.blocks[k].g)
        h_parts.append(scaled.blocks[k].h)
        dims["l"] += scaled.blocks[k].size
    for k in order["q"]:
        g_rows.append(scaled.blocks[k].g)
        h_parts.append(scaled.blocks[k].h)
        dims["q"].append(scaled.blocks[k].size)
    for k in order["s"]:
        blk = scaled.blocks[k]
        g_full, h_full = _expand_psd_block(blk.g, blk.h, blk.side)
        g_rows.append(g_full)
        h_parts.append(h_full)
        dims["s"].append(blk.side)
    if not g_rows:
        raise ConicError("program has no inequality cone blocks; nothing to solve")

    c_cv = matrix(scaled.objective)
    g_cv = _to_cvx_sparse(sp.vstack(g_rows))
    h_cv = matrix(np.concatenate(h_parts))
    have_eq = eq_b.shape[0] > 0
    a_cv = _to_cvx_sparse(eq_a) if have_eq else None
    b_cv = matrix(eq_b) if have_eq else None

    opts = {
        "show_progress": settings.verbose,
        "abstol": settings.tolerance,
        "reltol": settings.tolerance,
        "feastol": settings.tolerance,
        "maxiters": int(min(settings.max_iters, 1000)),
    }

    kkt = None
    if sum(scaled.blocks[k].side ** 2 for k in order["s"]) >= _BIG_PSD_FULLDIM:
        nonneg_g = sp.vstack([scaled.blocks[k].g for k in order["l"]]).tocsr() \
            if order["l"] else sp.csr_matrix((0, scaled.num_vars))
        soc_gs = [scaled.blocks[k].g.toarray() for k in order["q"]]
        psd_blocks = [(scaled.blocks[k].g, scaled.blocks[k].side) for k in order["s"]]
        schur = _SchurKkt(nonneg_g, soc_gs, psd_blocks,
                          eq_a.toarray() if have_eq else None)
        kkt = schur.factor

    t0 = time.perf_counter()
    try:
        result = solvers.conelp(c_cv, g_cv, h_cv, dims, A=a_cv, b=b_cv,
                                kktsolver=kkt, options=opts)
    except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
        return ConicSolution(status="numericalFailure",
                             x=np.full(program.num_vars, np.nan),
                             objective_value=float("nan"),
                             primal_residual=float("inf"),
                             dual_residual=float("inf"),
                             duality_gap=float("inf"),
                             solve_seconds=time.perf_counter() - t0,
                             message=f"solver raised: {exc}")
    elapsed = time.perf_counter() - t0

    status = result["status"]
    iters = int(result.get("iterations", 0))
    if status == "primal infeasible":
        return ConicSolution("infeasible", np.full(program.num_vars, np.nan),
                             float("inf"), float("inf"), float("inf"), float("inf"),
                             iters, elapsed, "primal infeasibility certificate found")
    if status == "dual infeasible":
        return ConicSolution("unbounded", np.full(program.num_vars, np.nan),
                             float("-inf"), float("inf"), float("inf"), float("inf"),
                             iters, elapsed, "dual infeasibility certificate found")
    if result["x"] is None:
        return ConicSolution("numericalFailure", np.full(program.num_vars, np.nan),
                             float("nan"), float("inf"), float("inf"), float("inf"),
                             iters, elapsed, "no iterate returned")

    x = col_scale * np.array(result["x"]).ravel()
    report = check_solution(program, x)
    gap = float(result.get("gap") or np.inf) / obj_scale
    rel_gap = result.get("relative gap")
    # dual residual is reported in the equilibrated metric
    dual_res = float(result.get("dual infeasibility") or np.inf)
    primal_res = report.max_violation

    ok = status == "optimal"
    if not ok:
        # conelp stopped at 'unknown'; accept the iterate only if it meets
        # the requested tolerances under our own residual audit.
        scale = 1.0 + abs(report.objective_value)
        gap_ok = gap <= settings.tolerance * scale or (
            rel_gap is not None and rel_gap <= settings.tolerance)
        ok = (primal_res <= settings.tolerance and dual_res <= settings.tolerance
              and gap_ok)

    if ok:
        return ConicSolution("optimal", x, report.objective_value, primal_res,
                             dual_res, gap, iters, elapsed, "")
    reached_limit = iters >= opts["maxiters"]
    return ConicSolution("maxIters" if reached_limit else "numericalFailure",
                         x, report.objective_value, primal_res, dual_res, gap,
                         iters, elapsed,
                         f"terminated '{status}' with primal residual {primal_res:.2e}, "
                         f"dual residual {dual_res:.2e}, gap {gap:.2e}")
