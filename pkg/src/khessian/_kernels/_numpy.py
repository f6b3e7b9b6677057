"""Vectorized numpy implementations of the hot kernels.

Every function operates on a leading batch axis. The symmetric-function
recurrences use the same operation order as the numba kernels, so the
two backends agree bitwise there; eigen-decompositions agree to roundoff.
"""
import numpy as np


def elem_sym(lam, k):
    """All elementary symmetric functions sigma_0..sigma_k of each row.

    Parameters
    ----------
    lam : (N, n) array
    k : int

    Returns
    -------
    (N, k + 1) array
    """
    lam = np.asarray(lam, dtype=np.float64)
    N, n = lam.shape
    out = np.zeros((N, k + 1))
    out[:, 0] = 1.0
    for i in range(n):
        x = lam[:, i]
        for j in range(min(i + 1, k), 0, -1):
            out[:, j] += x * out[:, j - 1]
    return out


def elem_sym_deleted(lam, k):
    """sigma_k of each row with entry i removed, for every i.

    Returns
    -------
    (N, n) array whose column i is sigma_k(lam without lam_i).
    """
    lam = np.asarray(lam, dtype=np.float64)
    N, n = lam.shape
    out = np.empty((N, n))
    for i in range(n):
        acc = np.zeros((N, k + 1))
        acc[:, 0] = 1.0
        cnt = 0
        for q in range(n):
            if q == i:
                continue
            x = lam[:, q]
            for j in range(min(cnt + 1, k), 0, -1):
                acc[:, j] += x * acc[:, j - 1]
            cnt += 1
        out[:, i] = acc[:, k]
    return out


def pencil_eig(h, g):
    """Generalized eigenpairs of the symmetric pencils (h, g).

    Whitens with the Cholesky factor g = L L^T and diagonalizes
    L^{-1} h L^{-T}.

    Returns
    -------
    lam : (N, n) array
        Eigenvalues sorted descending.
    W : (N, n, n) array
        Column m is the g-orthonormal eigenvector of ``lam[:, m]``.
    """
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    M = Linv @ h @ np.swapaxes(Linv, -1, -2)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    w, v = np.linalg.eigh(M)
    w = w[:, ::-1]
    v = v[:, :, ::-1]
    W = np.swapaxes(Linv, -1, -2) @ v
    return np.ascontiguousarray(w), np.ascontiguousarray(W)


def spectral_grad(W, d):
    """Assemble sum_m d_m W[:, i, m] W[:, j, m] for each batch entry."""
    return np.einsum("aim,ajm,am->aij", W, W, d)
