"""Small dense linear algebra: determinants, characteristic polynomials,
spectra, Green kernels, and Schur complements.

Everything here is double precision unless stated; the frac_* functions give
the exact-rational path used by the enumeration oracle (integer rates,
rational q), where identities are compared coefficient for coefficient.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ComplexSpectrum, NoConvergence, Singular, SingularBlock, SizeCap
from .graph import DENSE_CAP, generator_matrix

# -- determinants --------------------------------------------------------------


def det(M):
    """Determinant by LU with partial pivoting; singular matrices give 0."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 1.0
    return float(np.linalg.det(M))


def principal_submatrix(M, idx):
    idx = list(idx)
    M = np.asarray(M, dtype=float)
    return M[np.ix_(idx, idx)]


def det_sub(M, idx):
    """det of the principal submatrix indexed by idx; det_sub(M, []) = 1."""
    idx = sorted(idx)
    if not idx:
        return 1.0
    return det(principal_submatrix(M, idx))


# -- characteristic polynomial and adjugate (Faddeev-LeVerrier) -----------------


def char_poly(M, cap=DENSE_CAP):
    """Coefficients of det(qI - M) in q, highest power first (leading 1).

    Uses the Faddeev-LeVerrier recurrence, which stays in real arithmetic
    instead of multiplying possibly-complex eigenvalues.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if n > cap:
        raise SizeCap(f"n={n} exceeds cap {cap}")
    coeffs = [1.0]
    B = np.eye(n)
    for k in range(1, n + 1):
        C = M @ B
        a = -np.trace(C) / k
        coeffs.append(float(a))
        B = C + a * np.eye(n)
    return np.array(coeffs)


def adjugate_poly(M):
    """Matrices B_k with adj(qI - M) = sum_k B_k q^(n-1-k), k = 0..n-1."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    mats = []
    B = np.eye(n)
    for k in range(1, n + 1):
        mats.append(B)
        C = M @ B
        a = -np.trace(C) / k
        B = C + a * np.eye(n)
    return mats


# -- spectra --------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues ordered by non-decreasing real part."""

    eigenvalues: np.ndarray
    all_real: bool

    @property
    def n(self):
        return len(self.eigenvalues)

    def real(self):
        if not self.all_real:
            raise ComplexSpectrum("spectrum has a non-real part")
        return np.real(self.eigenvalues)


def _matrix_digest(M):
    return hashlib.sha256(np.ascontiguousarray(M).tobytes()).hexdigest()[:16]


def eigenvalues(M, mu=None, cap=DENSE_CAP):
    """Spectrum of M, via a symmetric solver when a reversible mu is supplied.

    With mu, M is conjugated by diag(sqrt(mu)); the result must be symmetric
    (reversibility), and eigenvalues are exactly real.  Without mu, LAPACK's
    Hessenberg-plus-shifted-QR path is used and all_real is set when
    max |Im| <= 1e-8 * max |Re|.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if n > cap:
        raise SizeCap(f"n={n} exceeds cap {cap}")
    if mu is not None:
        d = np.sqrt(np.asarray(mu, dtype=float))
        C = M * (d[:, None] / d[None, :])
        ev = np.linalg.eigvalsh((C + C.T) / 2.0)
        return Spectrum(ev.astype(complex), True)
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigensolver failed on matrix {_matrix_digest(M)}") from exc
    order = np.lexsort((ev.imag, ev.real))
    ev = ev[order]
    max_re = float(np.max(np.abs(ev.real))) if n else 0.0
    max_im = float(np.max(np.abs(ev.imag))) if n else 0.0
    return Spectrum(ev, max_im <= 1e-8 * max_re)


def generator_spectrum(graph, mu=None, cap=DENSE_CAP):
    """Spectrum of -L for a graph, symmetrized through mu when reversible."""
    L = generator_matrix(graph, cap=cap)
    return eigenvalues(-L, mu=mu, cap=cap)


# -- Green kernel ----------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """Killed-walk kernel K(x,y) = P_x(last state before absorption is y).

    Indices run over `support`, the vertices with finite killing rate; K equals
    the Green function G = inv([Q - L] restricted to the support) with columns
    scaled by the killing rates, and is substochastic.
    """

    K: np.ndarray
    green: np.ndarray
    support: tuple

    def index_of(self, x):
        return self.support.index(x)


def kernel(graph, plan, cap=DENSE_CAP):
    """Green function and kernel of the walk with killing plan `plan`."""
    support = plan.finite_support()
    if not support:
        raise Singular("no vertex has a finite killing rate")
    if graph.n > cap:
        raise SizeCap(f"n={graph.n} exceeds cap {cap}")
    m = len(support)
    M = np.zeros((m, m))
    for i, x in enumerate(support):
        for j, y in enumerate(support):
            M[i, j] = -graph.rate(x, y)
        M[i, i] = plan.q(x) + graph.out_rate[x]
    try:
        G = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise Singular(f"Q - L singular on support; cond={np.linalg.cond(M):.3e}") from exc
    q = np.array([plan.q(x) for x in support])
    return Kernel(G * q[None, :], G, tuple(support))


# -- Schur complements -------------------------------------------------------------


def schur_complement(M, keep):
    """Schur complement onto the `keep` indices: M_AA - M_AB M_BB^{-1} M_BA."""
    M = np.asarray(M, dtype=float)
    keep = sorted(keep)
    drop = sorted(set(range(M.shape[0])) - set(keep))
    if not drop:
        return M[np.ix_(keep, keep)].copy()
    A = M[np.ix_(keep, keep)]
    B = M[np.ix_(keep, drop)]
    C = M[np.ix_(drop, keep)]
    D = M[np.ix_(drop, drop)]
    try:
        X = np.linalg.solve(D, C)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock("eliminated block is singular") from exc
    return A - B @ X


def trace_generator(graph, keep, cap=DENSE_CAP):
    """Generator of the process watched only on `keep` (Schur complement of L).

    The result is a valid generator: rows sum to ~0 and off-diagonal entries
    are clamped to 0 when they come out a hair negative (magnitude <= 1e-12).
    """
    keep = sorted(keep)
    if not keep:
        raise ValueError("keep must be nonempty")
    L = generator_matrix(graph, cap=cap)
    S = schur_complement(L, keep)
    k = len(keep)
    for i in range(k):
        for j in range(k):
            if i != j and S[i, j] < 0:
                if S[i, j] < -1e-12 * max(1.0, abs(S).max()):
                    raise SingularBlock(f"trace generator has negative rate {S[i,j]!r}")
                S[i, j] = 0.0
    return S


# -- exact rational path -------------------------------------------------------------


def frac_identity(n):
    return [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]


def frac_mat_mul(A, B):
    n, m, p = len(A), len(B), len(B[0]) if B else 0
    return [[sum(A[i][k] * B[k][j] for k in range(m)) for j in range(p)] for i in range(n)]


def frac_det(M):
    """Exact determinant by fraction Gaussian elimination."""
    n = len(M)
    if n == 0:
        return Fraction(1)
    A = [row[:] for row in M]
    sign = 1
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            sign = -sign
        for r in range(col + 1, n):
            if A[r][col]:
                f = A[r][col] / A[col][col]
                for c in range(col, n):
                    A[r][c] -= f * A[col][c]
    out = Fraction(sign)
    for i in range(n):
        out *= A[i][i]
    return out


def frac_det_sub(M, idx):
    idx = sorted(idx)
    return frac_det([[M[i][j] for j in idx] for i in idx])


def frac_char_poly(M):
    """Exact det(qI - M) coefficients, highest power first."""
    n = len(M)
    coeffs = [Fraction(1)]
    B = frac_identity(n)
    for k in range(1, n + 1):
        C = frac_mat_mul(M, B)
        a = -sum(C[i][i] for i in range(n)) / k
        coeffs.append(a)
        B = [[C[i][j] + (a if i == j else 0) for j in range(n)] for i in range(n)]
    return coeffs


def frac_adjugate_poly(M):
    """Exact B_k with adj(qI - M) = sum_k B_k q^(n-1-k)."""
    n = len(M)
    mats = []
    B = frac_identity(n)
    for k in range(1, n + 1):
        mats.append(B)
        C = frac_mat_mul(M, B)
        a = -sum(C[i][i] for i in range(n)) / k
        B = [[C[i][j] + (a if i == j else 0) for j in range(n)] for i in range(n)]
    return mats


# -- polynomial helpers (ascending coefficient lists) ---------------------------------


def poly_trim(p):
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


def poly_add(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def poly_sub(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)]


def poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def poly_scale(a, c):
    return [c * ai for ai in a]


def poly_eval(a, x):
    out = 0
    for c in reversed(a):
        out = out * x + c
    return out


def descending_to_ascending(coeffs):
    return list(reversed(list(coeffs)))
