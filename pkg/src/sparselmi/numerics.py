"""Dense real matrix kernel shared by every other module.

Matrices are plain 2-D float ndarrays. Eigenvalues go through LAPACK's
Hessenberg-QR (general) and symmetric tridiagonal (symmetric) drivers;
all definiteness comparisons take an explicit ``eps`` so no tolerance
hides inside this module.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg


class NumericsError(ValueError):
    """Raised for ill-posed matrix inputs (shape, symmetry, conditioning)."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float array and reject non-finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise NumericsError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.size and not np.all(np.isfinite(m)):
        raise NumericsError(f"{name} contains non-finite entries")
    return m


def require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise NumericsError(f"{name} must be square, got shape {m.shape}")
    return m


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; block (i, j) of the result is a[i, j] * b."""
    return np.kron(as_matrix(a, "A"), as_matrix(b, "B"))


def spectrum(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a square matrix as a complex array.

    Symmetric inputs (within 1e-12 relative) are routed through the
    symmetric solver so edge-of-stability answers stay reliable.
    """
    m = require_square(a, "A")
    if m.size == 0:
        return np.array([], dtype=complex)
    if is_symmetric(m, rtol=1e-12):
        return scipy.linalg.eigvalsh(sym(m)).astype(complex)
    try:
        return scipy.linalg.eigvals(m)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - QR rarely stalls
        raise NumericsError(f"eigenvalue iteration failed to converge: {exc}") from exc


def is_symmetric(m: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = np.max(np.abs(m)) if m.size else 0.0
    return bool(np.max(np.abs(m - m.T), initial=0.0) <= rtol * max(scale, 1.0))


def sym(m: np.ndarray) -> np.ndarray:
    """Symmetrize (m + m.T) / 2."""
    return 0.5 * (m + m.T)


def assert_negdef(m: np.ndarray, eps: float = 0.0) -> tuple[bool, float]:
    """Test lambda_max(M) <= -eps for symmetric M; margin is -lambda_max.

    M must be symmetric within 1e-12 * ||M||; it is symmetrized before the
    eigenvalue solve. Returns ``(ok, margin)``.
    """
    m = require_square(m, "M")
    if eps < 0:
        raise NumericsError("eps must be nonnegative")
    if not is_symmetric(m):
        raise NumericsError("matrix is asymmetric beyond 1e-12 tolerance")
    lam_max = float(scipy.linalg.eigvalsh(sym(m))[-1]) if m.size else 0.0
    margin = -lam_max
    return (lam_max <= -eps), margin


def assert_posdef(m: np.ndarray, eps: float = 0.0) -> tuple[bool, float]:
    """Test lambda_min(M) >= eps for symmetric M; margin is lambda_min."""
    ok, margin = assert_negdef(-as_matrix(m, "M"), eps)
    return ok, margin


def solve_linear(a: np.ndarray, b: np.ndarray, cond_limit: float = 1e12) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting.

    Rejects matrices whose 1-norm condition estimate exceeds
    ``cond_limit`` instead of returning a silently inaccurate solution.
    """
    a = require_square(a, "A")
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise NumericsError(f"rhs has {b.shape[0]} rows, expected {a.shape[0]}")
    if a.size == 0:
        return np.zeros_like(b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    diag = np.abs(np.diag(lu))
    if not np.all(diag > 0.0):
        raise NumericsError("matrix is singular to working precision")
    anorm = np.linalg.norm(a, 1)
    rcond = scipy.linalg.lapack.dgecon(lu, anorm)[0]
    if rcond <= 0.0 or 1.0 / rcond > cond_limit:
        cond = np.inf if rcond <= 0.0 else 1.0 / rcond
        raise NumericsError(f"matrix too ill-conditioned to solve (cond ~ {cond:.3e})")
    return scipy.linalg.lu_solve((lu, piv), b)


def pd_solve(m: np.ndarray, b: np.ndarray, min_eig_rel: float = 1e-10) -> np.ndarray:
    """Solve M x = b for symmetric positive definite M via Cholesky."""
    m = require_square(m, "M")
    if not is_symmetric(m, rtol=1e-10):
        raise NumericsError("pd_solve requires a symmetric matrix")
    scale = max(np.max(np.abs(m)), 1e-300)
    try:
        cho = scipy.linalg.cho_factor(sym(m))
    except scipy.linalg.LinAlgError as exc:
        raise NumericsError(f"matrix is not positive definite: {exc}") from exc
    if np.min(np.abs(np.diag(cho[0]))) ** 2 < min_eig_rel * scale:
        raise NumericsError("matrix is numerically singular for a PD solve")
    return scipy.linalg.cho_solve(cho, np.asarray(b, dtype=float))


def pd_inverse(m: np.ndarray, cond_limit: float = 1e10) -> np.ndarray:
    """Inverse of a symmetric PD matrix; errors if condition exceeds the limit."""
    m = require_square(m, "M")
    w = scipy.linalg.eigvalsh(sym(m))
    if w[0] <= 0.0:
        raise NumericsError(f"matrix not positive definite (lambda_min = {w[0]:.3e})")
    if w[-1] / w[0] > cond_limit:
        raise NumericsError(f"PD matrix too ill-conditioned (cond = {w[-1] / w[0]:.3e})")
    return sym(pd_solve(m, np.eye(m.shape[0])))


def sym_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric PSD matrix (eigenvalue based)."""
    m = require_square(m, "M")
    if not is_symmetric(m, rtol=1e-10):
        raise NumericsError("sym_sqrt requires a symmetric matrix")
    w, v = scipy.linalg.eigh(sym(m))
    scale = max(abs(w[-1]), 1.0) if w.size else 1.0
    if w.size and w[0] < -1e-10 * scale:
        raise NumericsError(f"matrix not PSD (lambda_min = {w[0]:.3e})")
    return sym((v * np.sqrt(np.clip(w, 0.0, None))) @ v.T)


def read_matrix_csv(path) -> np.ndarray:
    """Read a plain decimal CSV matrix (no header); rejects ragged rows."""
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise NumericsError(f"{path}:{lineno}: non-numeric field ({exc})") from exc
            if rows and len(row) != len(rows[0]):
                raise NumericsError(
                    f"{path}:{lineno}: ragged row ({len(row)} fields, expected {len(rows[0])})"
                )
            rows.append(row)
    if not rows:
        raise NumericsError(f"{path}: empty matrix file")
    return as_matrix(np.array(rows), str(path))


def write_matrix_csv(path, m: np.ndarray) -> None:
    """Write a matrix as plain decimal CSV, one row per line."""
    m = as_matrix(m, "matrix")
    with open(path, "w", encoding="utf-8") as fh:
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
