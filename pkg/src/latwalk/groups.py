"""The block upper-triangular group P = AKU inside SL_{M+N} and its action on
M x N matrices as algebraic similarities.

An element of P factors uniquely as a_t k u_alpha with

    a_t = diag(e^{t/M} 1_M, e^{-t/N} 1_N),
    k   = diag(O1, O2),        O1, O2 orthogonal,
    u_a = [[1_M, -alpha], [0, 1_N]],

so the assembled matrix is [[e^{t/M} O1, -e^{t/M} O1 alpha], [0, e^{-t/N} O2]].
Acting on beta in R^{M x N}: a_t scales by e^{t(1/M+1/N)}, k maps beta to
O1 beta O2^{-1}, and u_alpha translates by -alpha.  All generators used by the
walk presets have determinant one, so the whole artifact works in SL_d; a
projective quotient is never needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import check_finite


class NotInP(ValueError):
    """Matrix is not (numerically) in the block group P."""


@dataclass(frozen=True)
class PElement:
    """Decomposed element a_t k u_alpha of P with M x N block shape."""

    m_dim: int
    n_dim: int
    t: float
    o1: np.ndarray
    o2: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "o1", np.atleast_2d(np.asarray(self.o1, float)))
        object.__setattr__(self, "o2", np.atleast_2d(np.asarray(self.o2, float)))
        a = np.asarray(self.alpha, float).reshape(self.m_dim, self.n_dim)
        object.__setattr__(self, "alpha", a)
        for o, dim, name in ((self.o1, self.m_dim, "o1"), (self.o2, self.n_dim, "o2")):
            if o.shape != (dim, dim):
                raise ValueError(f"{name} has wrong shape {o.shape}")
            if np.max(np.abs(o.T @ o - np.eye(dim))) > 1e-10:
                raise ValueError(f"{name} not orthogonal to 1e-10")

    @property
    def dim(self) -> int:
        return self.m_dim + self.n_dim

    @property
    def scale(self) -> float:
        """Similarity ratio of the action on R^{M x N}."""
        return float(np.exp(self.t * (1.0 / self.m_dim + 1.0 / self.n_dim)))


@dataclass(frozen=True)
class Similarity:
    """Affine similarity beta -> ratio * o1 @ beta @ o2 + translation."""

    m_dim: int
    n_dim: int
    ratio: float
    o1: np.ndarray
    o2: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if self.ratio <= 0:
            raise ValueError("similarity ratio must be positive")
        object.__setattr__(self, "o1", np.atleast_2d(np.asarray(self.o1, float)))
        object.__setattr__(self, "o2", np.atleast_2d(np.asarray(self.o2, float)))
        b = np.asarray(self.translation, float).reshape(self.m_dim, self.n_dim)
        object.__setattr__(self, "translation", b)
        for o, dim, name in ((self.o1, self.m_dim, "o1"), (self.o2, self.n_dim, "o2")):
            if o.shape != (dim, dim):
                raise ValueError(f"{name} has wrong shape {o.shape}")
            if np.max(np.abs(o.T @ o - np.eye(dim))) > 1e-10:
                raise ValueError(f"{name} not orthogonal to 1e-10")

    @property
    def contracting(self) -> bool:
        return self.ratio < 1.0

    def __call__(self, beta) -> np.ndarray:
        beta = np.asarray(beta, float).reshape(self.m_dim, self.n_dim)
        return self.ratio * (self.o1 @ beta @ self.o2) + self.translation

    def inverse(self) -> "Similarity":
        r = 1.0 / self.ratio
        o1t = self.o1.T
        o2t = self.o2.T
        b = -r * (o1t @ self.translation @ o2t)
        return Similarity(self.m_dim, self.n_dim, r, o1t, o2t, b)

    def compose(self, other: "Similarity") -> "Similarity":
        """self after other: (self . other)(beta) = self(other(beta))."""
        r = self.ratio * other.ratio
        o1 = self.o1 @ other.o1
        o2 = other.o2 @ self.o2
        b = self.ratio * (self.o1 @ other.translation @ self.o2) + self.translation
        return Similarity(self.m_dim, self.n_dim, r, o1, o2, b)


def aku_compose(p: PElement) -> np.ndarray:
    """Assemble the (M+N) x (M+N) matrix a_t k u_alpha."""
    m, n = p.m_dim, p.n_dim
    em = np.exp(p.t / m)
    en = np.exp(-p.t / n)
    g = np.zeros((m + n, m + n))
    g[:m, :m] = em * p.o1
    g[:m, m:] = -em * (p.o1 @ p.alpha)
    g[m:, m:] = en * p.o2
    return g


def aku_decompose(g: np.ndarray, m_dim: int, n_dim: int) -> PElement:
    """Extract (t, o1, o2, alpha) from a matrix in P.

    t = log|det(top-left block)|; the o-blocks are the rescaled diagonal
    blocks (must be orthogonal to 1e-8); alpha = -e^{-t/M} o1^T B for the
    top-right block B.  The lower-left block must vanish to 1e-9.
    """
    g = check_finite(g)
    m, n = m_dim, n_dim
    if g.shape != (m + n, m + n):
        raise ValueError(f"expected {(m + n, m + n)} matrix, got {g.shape}")
    if np.max(np.abs(g[m:, :m])) > 1e-9:
        raise NotInP("nonzero lower-left block")
    a = g[:m, :m]
    det_a = np.linalg.det(a)
    if abs(det_a) < 1e-300:
        raise NotInP("singular top-left block")
    t = float(np.log(abs(det_a)))
    o1 = np.exp(-t / m) * a
    if np.max(np.abs(o1.T @ o1 - np.eye(m))) > 1e-8:
        raise NotInP("top-left block is not a similarity of orthogonal type")
    o2 = np.exp(t / n) * g[m:, m:]
    if np.max(np.abs(o2.T @ o2 - np.eye(n))) > 1e-8:
        raise NotInP("bottom-right block is not a similarity of orthogonal type")
    alpha = -np.exp(-t / m) * (o1.T @ g[:m, m:])
    return PElement(m, n, t, o1, o2, alpha)


def in_p(g: np.ndarray, m_dim: int, n_dim: int) -> bool:
    try:
        aku_decompose(g, m_dim, n_dim)
        return True
    except (NotInP, ValueError):
        return False


def p_mul(p: PElement, q: PElement) -> PElement:
    """Group product inside P (via compose, multiply, decompose)."""
    if (p.m_dim, p.n_dim) != (q.m_dim, q.n_dim):
        raise ValueError("block shapes differ")
    return aku_decompose(aku_compose(p) @ aku_compose(q), p.m_dim, p.n_dim)


def p_inv(p: PElement) -> PElement:
    return aku_decompose(np.linalg.inv(aku_compose(p)), p.m_dim, p.n_dim)


def similarity_action(p: PElement, beta) -> np.ndarray:
    """Left action of P on R^{M x N}: a_t k u_alpha . beta."""
    beta = np.asarray(beta, float).reshape(p.m_dim, p.n_dim)
    return p.scale * (p.o1 @ (beta - p.alpha) @ p.o2.T)


def similarity_to_group(s: Similarity) -> PElement:
    """The element of P acting on R^{M x N} exactly as the similarity s.

    t = log(ratio) / (1/M + 1/N); the second rotation block enters inverted
    (the action of k is beta -> O1 beta O2^{-1}).  Scalar rotation blocks are
    normalized to +1 by pushing signs across, which fixes the representative
    for M = 1 or N = 1.
    """
    m, n = s.m_dim, s.n_dim
    t = float(np.log(s.ratio) / (1.0 / m + 1.0 / n))
    o1 = s.o1.copy()
    o2 = s.o2.T.copy()  # inverse of the similarity's right rotation
    if m == 1 and o1[0, 0] < 0:
        o1 = -o1
        o2 = -o2
    if n == 1 and o2[0, 0] < 0 and m > 1:
        o2 = -o2
        o1 = -o1
    # translation = -ratio * O1 alpha O2^{-1}  =>  alpha from b
    alpha = -(1.0 / s.ratio) * (o1.T @ s.translation @ o2)
    return PElement(m, n, t, o1, o2, alpha)


def group_to_similarity(p: PElement) -> Similarity:
    """Inverse of similarity_to_group (reads the action off the PElement)."""
    r = p.scale
    b = -r * (p.o1 @ p.alpha @ p.o2.T)
    return Similarity(p.m_dim, p.n_dim, r, p.o1.copy(), p.o2.T.copy(), b)


def make_block_element(c: float, o: np.ndarray, y) -> np.ndarray:
    """Block generator [[c O, y], [0, c^{-d}]] in SL_{d+1} (requires c > 1).

    Lies in P with (M, N) = (d, 1) and flow time t = d log c.
    """
    if c <= 1.0:
        raise ValueError("block generators require c > 1")
    o = np.atleast_2d(np.asarray(o, float))
    d = o.shape[0]
    if np.max(np.abs(o.T @ o - np.eye(d))) > 1e-10:
        raise ValueError("rotation block not orthogonal")
    if np.linalg.det(o) < 0:
        raise ValueError("rotation block must be special orthogonal")
    y = np.asarray(y, float).reshape(d)
    g = np.zeros((d + 1, d + 1))
    g[:d, :d] = c * o
    g[:d, d] = y
    g[d, d] = c ** (-float(d))
    return g


def sl3_paper_example() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three SL_3 generators diag(3,2,1/6) and its two unipotent bumps."""
    g1 = np.diag([3.0, 2.0, 1.0 / 6.0])
    g2 = g1.copy()
    g2[0, 2] = 1.0
    g3 = g1.copy()
    g3[1, 2] = 1.0
    return g1, g2, g3
