"""numba-compiled versions of the kernels in ``_numpy``."""
import numpy as np
from numba import config, njit, prange

# points per scratch allocation in the parallel loops
CHUNK = 256
# prefer OpenMP and skip the TBB probe, which warns on old TBB builds
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True)
def elem_sym(lam, k):
    N, n = lam.shape
    out = np.zeros((N, k + 1))
    for a in range(N):
        out[a, 0] = 1.0
        for i in range(n):
            x = lam[a, i]
            for j in range(min(i + 1, k), 0, -1):
                out[a, j] += x * out[a, j - 1]
    return out


@njit(cache=True, parallel=True)
def elem_sym_deleted(lam, k):
    N, n = lam.shape
    out = np.empty((N, n))
    for c in prange((N + CHUNK - 1) // CHUNK):
        acc = np.empty(k + 1)
        for a in range(c * CHUNK, min(N, (c + 1) * CHUNK)):
            _deleted_row(lam, a, k, acc, out)
    return out


@njit(cache=True)
def _deleted_row(lam, a, k, acc, out):
    n = lam.shape[1]
    for i in range(n):
        acc[0] = 1.0
        for j in range(1, k + 1):
            acc[j] = 0.0
        cnt = 0
        for q in range(n):
            if q == i:
                continue
            x = lam[a, q]
            for j in range(min(cnt + 1, k), 0, -1):
                acc[j] += x * acc[j - 1]
            cnt += 1
        out[a, i] = acc[k]


@njit(cache=True)
def _jacobi_eigh(A, V):
    """Cyclic Jacobi on the symmetric matrix A (overwritten); V gets the eigenvectors."""
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            V[i, j] = 1.0 if i == j else 0.0
    for sweep in range(60):
        off = 0.0
        tot = 0.0
        for i in range(n):
            tot += A[i, i] * A[i, i]
            for j in range(i + 1, n):
                off += A[i, j] * A[i, j]
        if off <= 1e-36 * (tot + off):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    x, y = A[r, p], A[r, q]
                    A[r, p] = c * x - s * y
                    A[r, q] = s * x + c * y
                for r in range(n):
                    x, y = A[p, r], A[q, r]
                    A[p, r] = c * x - s * y
                    A[q, r] = s * x + c * y
                A[p, q] = 0.0
                A[q, p] = 0.0
                for r in range(n):
                    x, y = V[r, p], V[r, q]
                    V[r, p] = c * x - s * y
                    V[r, q] = s * x + c * y


@njit(cache=True, parallel=True)
def pencil_eig(h, g):
    N, n, _ = h.shape
    lam = np.empty((N, n))
    W = np.empty((N, n, n))
    for c in prange((N + CHUNK - 1) // CHUNK):
        L = np.zeros((n, n))
        Li = np.zeros((n, n))
        M = np.empty((n, n))
        T = np.empty((n, n))
        V = np.empty((n, n))
        order = np.empty(n, dtype=np.int64)
        for a in range(c * CHUNK, min(N, (c + 1) * CHUNK)):
            _pencil_point(h[a], g[a], L, Li, M, T, V, order, lam[a], W[a])
    return lam, W


@njit(cache=True)
def _pencil_point(h, g, L, Li, M, T, V, order, lam, W):
    n = h.shape[0]
    # Cholesky g = L L^T; a non-positive pivot yields nan eigenvalues
    for i in range(n):
        for j in range(i + 1):
            s = g[i, j]
            for q in range(j):
                s -= L[i, q] * L[j, q]
            if i == j:
                L[i, i] = np.sqrt(s) if s > 0.0 else np.nan
            else:
                L[i, j] = s / L[j, j]
    # L^{-1} by forward substitution
    for j in range(n):
        Li[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for q in range(j, i):
                s -= L[i, q] * Li[q, j]
            Li[i, j] = s / L[i, i]
    # M = L^{-1} h L^{-T}, symmetrized
    for i in range(n):
        for j in range(n):
            s = 0.0
            for q in range(j + 1):
                s += h[i, q] * Li[j, q]
            T[i, j] = s
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for q in range(i + 1):
                s += Li[i, q] * T[q, j]
            s2 = 0.0
            for q in range(j + 1):
                s2 += Li[j, q] * T[q, i]
            M[i, j] = 0.5 * (s + s2)
            M[j, i] = M[i, j]
    _jacobi_eigh(M, V)
    # insertion sort, descending
    for i in range(n):
        order[i] = i
    for i in range(1, n):
        q = order[i]
        j = i - 1
        while j >= 0 and M[order[j], order[j]] < M[q, q]:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = q
    # W = L^{-T} V
    for m in range(n):
        col = order[m]
        lam[m] = M[col, col]
        for i in range(n):
            s = 0.0
            for q in range(i, n):
                s += Li[q, i] * V[q, col]
            W[i, m] = s


@njit(cache=True, parallel=True)
def spectral_grad(W, d):
    N, n, _ = W.shape
    out = np.zeros((N, n, n))
    for a in prange(N):
        for i in range(n):
            for j in range(i, n):
                s = 0.0
                for m in range(n):
                    s += d[a, m] * W[a, i, m] * W[a, j, m]
                out[a, i, j] = s
                out[a, j, i] = s
    return out
