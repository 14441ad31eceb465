"""Dense matrix kernels: exterior powers, the adjoint representation, norm
gauges, and numerically stable re-orthonormalized product steps.

Wedge coordinates use the lexicographic order on k-element subsets of
{0..d-1} throughout; the adjoint representation uses the basis E_ij (i != j,
lexicographic pairs) followed by H_i = E_ii - E_{i+1,i+1}.  Both orders are
fixed once here and relied on everywhere else.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .kernels import jacobi_singular_values


class GradeError(ValueError):
    """Wedge grade outside 1..d-1."""


class SingularMatrixError(ValueError):
    """Operation required an invertible matrix."""


def check_finite(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} has non-finite entries")
    return m


def wedge_basis(d: int, k: int) -> list[tuple[int, ...]]:
    """Lexicographic k-subsets of {0..d-1} indexing wedge coordinates."""
    return list(combinations(range(d), k))


def wedge_dim(d: int, k: int) -> int:
    from math import comb

    return comb(d, k)


def wedge_power(m: np.ndarray, k: int) -> np.ndarray:
    """k-th exterior power: entry (I, J) is the k x k minor on rows I, cols J.

    Multiplicative by Cauchy-Binet: wedge_power(A @ B, k) equals
    wedge_power(A, k) @ wedge_power(B, k).
    """
    m = check_finite(m)
    d = m.shape[0]
    if m.shape != (d, d):
        raise ValueError("square matrix required")
    if not 1 <= k <= d - 1:
        raise GradeError(f"grade k={k} outside 1..{d - 1}")
    if k == 1:
        return m.copy()
    subsets = wedge_basis(d, k)
    n = len(subsets)
    out = np.empty((n, n))
    rows = [np.array(s) for s in subsets]
    for a, I in enumerate(rows):
        mi = m[I]
        for b, J in enumerate(rows):
            out[a, b] = np.linalg.det(mi[:, J])
    return out


def _adjoint_basis_indices(d: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(d) for j in range(d) if i != j]


def adjoint_matrix(g: np.ndarray) -> np.ndarray:
    """Matrix of X -> g X g^{-1} on traceless d x d matrices.

    Basis: E_ij for i != j in lexicographic (i, j) order, then
    H_i = E_ii - E_{i+1,i+1} for i = 0..d-2, giving a (d^2-1) x (d^2-1)
    matrix.  With this order, conjugation-invariant coordinate lines (such as
    the strictly upper-triangular directions) sit on coordinate axes.
    """
    g = check_finite(g)
    d = g.shape[0]
    if abs(np.linalg.det(g)) < 1e-300:
        raise SingularMatrixError("adjoint of a singular matrix")
    ginv = np.linalg.inv(g)
    off = _adjoint_basis_indices(d)
    dim = d * d - 1
    out = np.empty((dim, dim))

    def coords(y: np.ndarray) -> np.ndarray:
        c = np.empty(dim)
        for a, (i, j) in enumerate(off):
            c[a] = y[i, j]
        diag = np.diag(y)
        # diag = sum c_i (e_i - e_{i+1})  =>  c_i = partial sums
        run = 0.0
        for i in range(d - 1):
            run += diag[i]
            c[len(off) + i] = run
        return c

    for a, (i, j) in enumerate(off):
        y = np.outer(g[:, i], ginv[j, :])
        out[:, a] = coords(y)
    for i in range(d - 1):
        x = np.zeros((d, d))
        x[i, i] = 1.0
        x[i + 1, i + 1] = -1.0
        y = g @ x @ ginv
        out[:, len(off) + i] = coords(y)
    return out


def adjoint_coordinate(d: int, i: int, j: int) -> int:
    """Index of the E_ij direction (i != j, 0-based) in the adjoint basis."""
    if i == j:
        raise ValueError("off-diagonal direction required")
    return _adjoint_basis_indices(d).index((i, j))


def operator_norm(m: np.ndarray) -> float:
    """Largest singular value, via one-sided Jacobi iteration."""
    m = check_finite(m)
    return float(jacobi_singular_values(np.ascontiguousarray(m, dtype=float))[0])


def singular_values(m: np.ndarray) -> np.ndarray:
    m = check_finite(m)
    return np.asarray(jacobi_singular_values(np.ascontiguousarray(m, dtype=float)))


def norm_gauge(m: np.ndarray) -> float:
    """max(||m||, ||m^{-1}||) in operator norm; >= 1, inversion-symmetric."""
    sv = singular_values(m)
    smin = float(sv[-1])
    if smin <= 1e-300:
        raise SingularMatrixError("norm gauge of a singular matrix")
    return max(float(sv[0]), 1.0 / smin)


def ortho_product_step(q: np.ndarray, g: np.ndarray):
    """One QR re-orthonormalization step of a matrix product.

    Given q with orthonormal columns, factor g @ q = q' R with R upper
    triangular and positive diagonal; returns (q', log(diag R)).
    """
    q = check_finite(q, "frame")
    g = check_finite(g)
    d = q.shape[1]
    if np.max(np.abs(q.T @ q - np.eye(d))) > 1e-8:
        raise ValueError("frame columns not orthonormal to 1e-8")
    y = g @ q
    qn, r = np.linalg.qr(y)
    diag = np.diag(r).copy()
    if np.any(np.abs(diag) < 1e-300):
        raise SingularMatrixError("rank-deficient product in QR step")
    signs = np.sign(diag)
    qn = qn * signs[np.newaxis, :]
    return qn, np.log(np.abs(diag))


def renormalize_det(m: np.ndarray) -> np.ndarray:
    """Rescale a near-unimodular matrix to determinant exactly +-1."""
    d = m.shape[0]
    det = np.linalg.det(m)
    if abs(det) < 1e-300:
        raise SingularMatrixError("cannot renormalize a singular matrix")
    return m / abs(det) ** (1.0 / d)


def is_unimodular(m: np.ndarray, tol: float = 1e-9) -> bool:
    return abs(np.linalg.det(m) - 1.0) <= tol


def random_sl(d: int, rng, scale: float = 1.0) -> np.ndarray:
    """Random determinant-one matrix (gaussian entries, det-normalized)."""
    while True:
        m = rng.standard_normal((d, d)) * scale
        det = np.linalg.det(m)
        if abs(det) > 1e-6:
            break
    m = m / abs(det) ** (1.0 / d)
    if np.linalg.det(m) < 0:
        m[:, 0] = -m[:, 0]
    return m
