"""Sparse SDPA (.dat-s) export and import for conic programs.

The file encodes

    minimize    sum_k c_k x_k
    subject to  X = sum_k x_k F_k - F0,   X block-diagonal PSD,

where negative entries of the block structure denote diagonal (LP)
blocks. Export maps our standard form onto that template: equalities and
zero blocks become paired LP rows, nonneg blocks become LP rows, SOC
blocks are rewritten as PSD arrow matrices, and PSD blocks transfer
entrywise (the file stores plain upper-triangle values, not the scaled
vectorization). Importing a written file reproduces the program up to
variable ordering and the LP/arrow rewrites.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .conic import (NONNEG, PSD, SOC, ZERO, ConeBlock, ConicError,
                    ConicProgram, svec_dim, svec_indices, svec_weights)


def _psd_entry_triplets(block: ConeBlock):
    """Yield (var_or_none, i, j, value) full-matrix upper-triangle entries."""
    i_idx, j_idx = svec_indices(block.side)
    wgt = svec_weights(block.side)
    coo = block.g.tocoo()
    for r, c, v in zip(coo.row, coo.col, coo.data):
        yield int(c), int(i_idx[r]), int(j_idx[r]), float(v / wgt[r])
    for r, hv in enumerate(block.h):
        if hv != 0.0:
            yield None, int(i_idx[r]), int(j_idx[r]), float(hv / wgt[r])


def export_sdpa(program: ConicProgram, path) -> None:
    """Write the program as a sparse SDPA file."""
    lp_g_rows: list[sp.spmatrix] = []
    lp_h: list[np.ndarray] = []

    def add_lp(g: sp.spmatrix, h: np.ndarray) -> None:
        lp_g_rows.append(g.tocsr())
        lp_h.append(np.asarray(h, dtype=float))

    if program.eq_b.shape[0]:
        add_lp(program.eq_a, program.eq_b)
        add_lp(-program.eq_a, -program.eq_b)
    psd_like: list[tuple[str, ConeBlock]] = []
    for blk in program.blocks:
        if blk.kind == ZERO:
            add_lp(blk.g, blk.h)
            add_lp(-blk.g, -blk.h)
        elif blk.kind == NONNEG:
            add_lp(blk.g, blk.h)
        elif blk.kind == SOC:
            psd_like.append(("arrow", blk))
        else:
            psd_like.append(("psd", blk))

    block_sizes: list[int] = []
    if lp_g_rows:
        lp_g = sp.vstack(lp_g_rows).tocsr()
        lp_hv = np.concatenate(lp_h)
        block_sizes.append(-lp_g.shape[0])
    for kind, blk in psd_like:
        block_sizes.append(blk.size if kind == "arrow" else blk.side)

    lines: list[str] = []
    m = program.num_vars
    lines.append(f"{m}")
    lines.append(f"{len(block_sizes)}")
    lines.append(" ".join(str(s) for s in block_sizes))
    lines.append(" ".join(repr(float(v)) for v in program.objective))

    def fmt(mat_no: int, blk_no: int, i: int, j: int, val: float) -> str:
        return f"{mat_no} {blk_no} {i} {j} {val!r}"

    entries: list[str] = []
    blk_no = 0
    if lp_g_rows:
        blk_no += 1
        # s = h - Gx >= 0  maps to diagonal entries sum_k x_k (-G) - (-h)
        coo = lp_g.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            if v != 0.0:
                entries.append(fmt(int(c) + 1, blk_no, int(r) + 1, int(r) + 1, -float(v)))
        for r, hv in enumerate(lp_hv):
            if hv != 0.0:
                entries.append(fmt(0, blk_no, int(r) + 1, int(r) + 1, -float(hv)))
    for kind, blk in psd_like:
        blk_no += 1
        if kind == "psd":
            for var, i, j, val in _psd_entry_triplets(blk):
                if var is None:
                    entries.append(fmt(0, blk_no, i + 1, j + 1, -val))
                else:
                    entries.append(fmt(var + 1, blk_no, i + 1, j + 1, -val))
        else:
            # arrow(s) = [[s0, s_tail'], [s_tail, s0 I]] for s = h - Gx
            dim = blk.size
            coo = blk.g.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                var = int(c) + 1
                if r == 0:
                    for dpos in range(dim):
                        entries.append(fmt(var, blk_no, dpos + 1, dpos + 1, -float(v)))
                else:
                    entries.append(fmt(var, blk_no, 1, int(r) + 1, -float(v)))
            for r, hv in enumerate(blk.h):
                if hv == 0.0:
                    continue
                if r == 0:
                    for dpos in range(dim):
                        entries.append(fmt(0, blk_no, dpos + 1, dpos + 1, -float(hv)))
                else:
                    entries.append(fmt(0, blk_no, 1, int(r) + 1, -float(hv)))

    with open(path, "w", encoding="utf-8") as fh:
        fh.write('"sparselmi conic export"\n')
        fh.write("\n".join(lines))
        fh.write("\n")
        fh.write("\n".join(entries))
        fh.write("\n")


def _tokenize(line: str) -> list[str]:
    for ch in "{}(),":
        line = line.replace(ch, " ")
    return line.split()


def read_sdpa(path) -> ConicProgram:
    """Parse a sparse SDPA file back into a ConicProgram.

    Diagonal blocks come back as one nonneg block each; matrix blocks as
    PSD blocks. Entries below the diagonal are rejected per the format.
    """
    header: list[list[str]] = []
    entry_rows: list[tuple[int, int, int, int, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("*") or line.startswith('"'):
                continue
            toks = _tokenize(line)
            if len(header) < 4:
                header.append(toks)
                continue
            if len(toks) != 5:
                raise ConicError(f"{path}:{lineno}: expected 5 fields, got {len(toks)}")
            mat_no, blk_no, i, j = (int(toks[0]), int(toks[1]), int(toks[2]), int(toks[3]))
            entry_rows.append((mat_no, blk_no, i, j, float(toks[4])))
    if len(header) < 4:
        raise ConicError(f"{path}: truncated header")
    m = int(header[0][0])
    n_block = int(header[1][0])
    sizes = [int(t) for t in header[2]]
    if len(sizes) != n_block:
        raise ConicError(f"{path}: block structure lists {len(sizes)} sizes, "
                         f"expected {n_block}")
    cvec = np.array([float(t) for t in header[3]])
    if cvec.shape[0] != m:
        raise ConicError(f"{path}: objective has {cvec.shape[0]} entries, expected {m}")

    # per block: triplets for F_k (k = 1..m) and F0
    f_entries: list[list[tuple[int, int, int, float]]] = [[] for _ in sizes]
    f0_entries: list[list[tuple[int, int, float]]] = [[] for _ in sizes]
    for mat_no, blk_no, i, j, val in entry_rows:
        if not 1 <= blk_no <= n_block:
            raise ConicError(f"{path}: block index {blk_no} out of range")
        if not 0 <= mat_no <= m:
            raise ConicError(f"{path}: matrix index {mat_no} out of range")
        if i > j:
            raise ConicError(f"{path}: lower-triangle entry ({i},{j}) not allowed")
        size = abs(sizes[blk_no - 1])
        if j > size:
            raise ConicError(f"{path}: entry ({i},{j}) outside block of size {size}")
        if sizes[blk_no - 1] < 0 and i != j:
            raise ConicError(f"{path}: off-diagonal entry in diagonal block {blk_no}")
        if mat_no == 0:
            f0_entries[blk_no - 1].append((i - 1, j - 1, val))
        else:
            f_entries[blk_no - 1].append((mat_no - 1, i - 1, j - 1, val))

    blocks: list[ConeBlock] = []
    for b, size_signed in enumerate(sizes):
        if size_signed < 0:
            size = -size_signed
            rows, cols, vals = [], [], []
            h = np.zeros(size)
            for var, i, j, val in f_entries[b]:
                rows.append(i)
                cols.append(var)
                vals.append(-val)  # s = h - Gx with G = -F_k columns
            for i, j, val in f0_entries[b]:
                h[i] += -val
            g = sp.csr_matrix((vals, (rows, cols)), shape=(size, m))
            blocks.append(ConeBlock(NONNEG, size, g, h))
        else:
            side = size_signed
            i_idx, j_idx = svec_indices(side)
            row_of = {}
            for r, (ii, jj) in enumerate(zip(i_idx, j_idx)):
                row_of[(int(ii), int(jj))] = r
            wgt = svec_weights(side)
            rows, cols, vals = [], [], []
            h = np.zeros(svec_dim(side))
            for var, i, j, val in f_entries[b]:
                r = row_of[(i, j)]
                rows.append(r)
                cols.append(var)
                vals.append(-val * wgt[r])
            for i, j, val in f0_entries[b]:
                r = row_of[(i, j)]
                h[r] += -val * wgt[r]
            g = sp.csr_matrix((vals, (rows, cols)), shape=(svec_dim(side), m))
            blocks.append(ConeBlock(PSD, svec_dim(side), g, h, side=side))

    return ConicProgram(m, cvec, sp.csr_matrix((0, m)), np.zeros(0), tuple(blocks))
