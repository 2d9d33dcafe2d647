"""Determinants, permanents, pairing sums, Pfaffians, norms and a symmetric eigensolver."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .geometry import SizeCapError

MAX_PERMANENT = 28
MAX_PAIRING = 20


def _square(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def determinant(M) -> complex | float:
    """Determinant by LU factorization with partial pivoting.

    Singular matrices give 0. Real input returns a float.
    """
    A = _square(M)
    A = A.astype(complex if np.iscomplexobj(A) else float, copy=True)
    n = A.shape[0]
    det = A.dtype.type(1)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if A[p, k] == 0:
            return A.dtype.type(0).item()
        if p != k:
            A[[k, p]] = A[[p, k]]
            det = -det
        det *= A[k, k]
        if k + 1 < n:
            factors = A[k + 1 :, k] / A[k, k]
            A[k + 1 :, k + 1 :] -= np.outer(factors, A[k, k + 1 :])
    return det.item()


def abs_permanent(M) -> float:
    """Permanent of ``|M|`` by Ryser's formula with Gray-code ordering.

    perm(A) = (-1)^n sum_S (-1)^{|S|} prod_i sum_{j in S} a_ij; consecutive
    subsets differ in one column so the row sums are updated in O(n).
    """
    A = np.abs(_square(M)).astype(float)
    n = A.shape[0]
    if n > MAX_PERMANENT:
        raise SizeCapError(f"n={n} exceeds the permanent cap {MAX_PERMANENT}")
    if n == 0:
        return 1.0
    row_sums = np.zeros(n)
    total = 0.0
    gray = 0
    for k in range(1, 1 << n):
        col = (k & -k).bit_length() - 1
        gray ^= 1 << col
        if gray >> col & 1:
            row_sums += A[:, col]
        else:
            row_sums -= A[:, col]
        size = bin(gray).count("1")
        term = float(np.prod(row_sums))
        total += -term if size % 2 else term
    return total if n % 2 == 0 else -total


def hafnian(A) -> float:
    """Sum over perfect pairings of products of entries of a symmetric matrix.

    Memoized over subsets, always pairing the lowest unpaired index.
    """
    A = _square(A)
    m = A.shape[0]
    if m % 2:
        raise ValueError("hafnian needs an even-dimensional matrix")
    if m > MAX_PAIRING:
        raise SizeCapError(f"2n={m} exceeds the pairing cap {MAX_PAIRING}")
    a = A.tolist()
    full = (1 << m) - 1

    @lru_cache(maxsize=None)
    def rec(mask: int):
        if mask == full:
            return 1.0
        i = (~mask & (mask + 1)).bit_length() - 1
        out = 0.0
        for j in range(i + 1, m):
            if not mask >> j & 1:
                out += a[i][j] * rec(mask | 1 << i | 1 << j)
        return out

    return rec(0)


def pairing_sum(M) -> float:
    """(1/n!) sum over S_2n of prod_j |m_{pi(2j-1) pi(2j)}|.

    Each pairing {a, b} is hit once per ordering of the n pairs and once
    per orientation, so the sum equals the hafnian of |M| + |M|^T.
    """
    A = np.abs(_square(M))
    return hafnian(A + A.T)


def pfaffian(M, tol: float = 1e-10) -> float:
    """Pfaffian by Parlett-Reid skew tridiagonalization with pivoting."""
    A = _square(M).astype(float, copy=True)
    n = A.shape[0]
    if n % 2:
        raise ValueError("Pfaffian is undefined for odd dimension")
    if np.linalg.norm(A + A.T) > tol * max(1.0, np.linalg.norm(A)):
        raise ValueError("matrix is not skew-symmetric")
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1 :, k])))
        if kp != k + 1:
            A[[k + 1, kp], k:] = A[[kp, k + 1], k:]
            A[k:, [k + 1, kp]] = A[k:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0.0:
            return 0.0
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2 :] / A[k, k + 1]
            col = A[k + 2 :, k + 1]
            A[k + 2 :, k + 2 :] += np.outer(tau, col) - np.outer(col, tau)
    return float(pf)


def skew_from_upper(values) -> np.ndarray:
    """Skew-symmetric matrix whose strict upper triangle is taken from ``values``."""
    V = np.asarray(values, dtype=float)
    U = np.triu(V, 1)
    return U - U.T


def spectral_norm(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def frobenius_norm(M) -> float:
    M = np.asarray(M)
    return float(np.sqrt(np.sum(np.abs(M) ** 2)))


def jacobi_eigh(H, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi rotations for a real symmetric matrix.

    Sweeps until the off-diagonal Frobenius mass is below ``tol * ||H||_F``.
    """
    A = np.array(H, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def sym_eigendecomposition(H, method: str = "lapack", tol: float = 1e-10):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a real symmetric matrix.

    ``method="jacobi"`` uses :func:`jacobi_eigh`; the default calls LAPACK.
    """
    H = _square(H)
    if np.iscomplexobj(H):
        raise ValueError("expected a real symmetric matrix")
    if np.linalg.norm(H - H.T) > tol * max(1.0, np.linalg.norm(H)):
        raise ValueError("matrix is not symmetric")
    if method == "jacobi":
        return jacobi_eigh(H)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    return np.linalg.eigh(H)
