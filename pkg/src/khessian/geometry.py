"""Finite-difference Riemannian geometry on a uniform box grid.

Grid functions are flat float arrays of length ``grid.size`` in C order
(axis 0 slowest). Symmetric (0,2)-tensor fields are arrays of shape
``(grid.size, n, n)``; symmetry is enforced on construction.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import MetricError


@dataclass(eq=False)
class Grid:
    """Uniform tensor-product grid on the box [lo, hi]."""

    lo: tuple
    hi: tuple
    m: tuple
    h: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.lo = tuple(float(v) for v in self.lo)
        self.hi = tuple(float(v) for v in self.hi)
        self.m = tuple(int(v) for v in self.m)
        if not (len(self.lo) == len(self.hi) == len(self.m)):
            raise ValueError("lo, hi and m must have equal length")
        if self.n not in (2, 3):
            raise ValueError(f"grid dimension {self.n} not supported (2 or 3)")
        if any(b <= a for a, b in zip(self.lo, self.hi)):
            raise ValueError("need hi > lo on every axis")
        if any(mi < 5 for mi in self.m):
            raise ValueError("need at least 5 points per axis")
        self.h = np.array([(b - a) / (mi - 1) for a, b, mi in zip(self.lo, self.hi, self.m)])

    @property
    def n(self):
        return len(self.m)

    @property
    def shape(self):
        return self.m

    @property
    def size(self):
        return int(np.prod(self.m))

    @property
    def hmax(self):
        return float(self.h.max())

    @cached_property
    def axes(self):
        return [np.linspace(a, b, mi) for a, b, mi in zip(self.lo, self.hi, self.m)]

    @cached_property
    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=1)

    @cached_property
    def boundary(self):
        idx = np.indices(self.m).reshape(self.n, -1)
        mask = np.zeros(self.size, dtype=bool)
        for a, mi in enumerate(self.m):
            mask |= (idx[a] == 0) | (idx[a] == mi - 1)
        return mask

    @property
    def interior(self):
        return ~self.boundary

    def multi_index(self, flat):
        return tuple(int(i) for i in np.unravel_index(flat, self.m))

    def flat_index(self, point):
        if np.ndim(point) == 0:
            return int(point)
        return int(np.ravel_multi_index(tuple(point), self.m))

    def refined(self):
        """Grid with every spacing halved (m -> 2m - 1)."""
        return Grid(self.lo, self.hi, tuple(2 * mi - 1 for mi in self.m))

    @cached_property
    def ops(self):
        return DiffOps(self)


def _d1_1d(m, h):
    D = sp.lil_matrix((m, m))
    for i in range(1, m - 1):
        D[i, i - 1] = -1.0
        D[i, i + 1] = 1.0
    D[0, 0:3] = [-3.0, 4.0, -1.0]
    D[m - 1, m - 3:m] = [1.0, -4.0, 3.0]
    return (D / (2.0 * h)).tocsr()


def _d2_1d(m, h):
    D = sp.lil_matrix((m, m))
    for i in range(1, m - 1):
        D[i, i - 1:i + 2] = [1.0, -2.0, 1.0]
    D[0, 0:4] = [2.0, -5.0, 4.0, -1.0]
    D[m - 1, m - 4:m] = [-1.0, 4.0, -5.0, 2.0]
    return (D / h**2).tocsr()


def _along_axis(op1d, axis, m):
    mats = [sp.identity(mi, format="csr") for mi in m]
    mats[axis] = op1d
    out = mats[0]
    for M in mats[1:]:
        out = sp.kron(out, M, format="csr")
    return out


class DiffOps:
    """Sparse difference matrices on a grid.

    ``d1[a]`` is the central first difference along axis ``a`` (second
    order one-sided at the ends); ``d2[a][b]`` is the 3-point second
    difference for ``a == b`` and ``d1[a] @ d1[b]`` otherwise.
    """

    def __init__(self, grid):
        n = grid.n
        self.d1 = [_along_axis(_d1_1d(grid.m[a], grid.h[a]), a, grid.m) for a in range(n)]
        self.d2 = [[None] * n for _ in range(n)]
        for a in range(n):
            self.d2[a][a] = _along_axis(_d2_1d(grid.m[a], grid.h[a]), a, grid.m)
            for b in range(a + 1, n):
                mixed = (self.d1[a] @ self.d1[b]).tocsr()
                self.d2[a][b] = self.d2[b][a] = mixed


# -- metric presets ---------------------------------------------------------

class FlatMetric:
    """The Euclidean metric."""

    def __init__(self, n):
        self.n = n

    def g(self, x):
        return np.broadcast_to(np.eye(self.n), (len(x), self.n, self.n)).copy()

    def dg(self, x):
        return np.zeros((len(x), self.n, self.n, self.n))


class DiagPolyMetric:
    """Diagonal metric with g_ii a polynomial in one coordinate.

    Parameters
    ----------
    entries : list of (axis, coeffs)
        ``g_ii(x) = sum_p coeffs[p] * x[axis] ** p``; axis None means the
        entry is the constant ``coeffs[0]``.
    """

    def __init__(self, entries):
        self.entries = [(a, np.asarray(c, dtype=float)) for a, c in entries]
        self.n = len(self.entries)

    def g(self, x):
        out = np.zeros((len(x), self.n, self.n))
        for i, (axis, c) in enumerate(self.entries):
            if axis is None:
                out[:, i, i] = c[0]
            else:
                out[:, i, i] = np.polynomial.polynomial.polyval(x[:, axis], c)
        return out

    def dg(self, x):
        out = np.zeros((len(x), self.n, self.n, self.n))
        for i, (axis, c) in enumerate(self.entries):
            if axis is not None:
                dc = np.polynomial.polynomial.polyder(c)
                out[:, axis, i, i] = np.polynomial.polynomial.polyval(x[:, axis], dc)
        return out


class ConformalMetric:
    """g = exp(2 psi) I with psi = c0 + lin . x + quad * |x|^2."""

    def __init__(self, n, c0=0.0, lin=None, quad=0.0):
        self.n = n
        self.c0 = float(c0)
        self.lin = np.zeros(n) if lin is None else np.asarray(lin, dtype=float)
        self.quad = float(quad)

    def psi(self, x):
        return self.c0 + x @ self.lin + self.quad * np.sum(x * x, axis=1)

    def g(self, x):
        return np.exp(2.0 * self.psi(x))[:, None, None] * np.eye(self.n)

    def dg(self, x):
        dpsi = self.lin[None, :] + 2.0 * self.quad * x
        return 2.0 * dpsi[:, :, None, None] * self.g(x)[:, None, :, :]


def metric_preset(spec, n):
    """Build a metric preset from its declarative form."""
    kind = spec.get("type", "flat")
    if kind == "flat":
        return FlatMetric(n)
    if kind == "diag_poly":
        entries = [(e.get("axis"), e["coeffs"]) for e in spec["diag"]]
        if len(entries) != n:
            raise ValueError(f"diag_poly needs {n} entries, got {len(entries)}")
        return DiagPolyMetric(entries)
    if kind == "conformal":
        return ConformalMetric(n, spec.get("c0", 0.0), spec.get("lin"), spec.get("quad", 0.0))
    raise ValueError(f"unknown metric preset {kind!r}")


# -- metric field -----------------------------------------------------------

def christoffel_from_derivatives(g_inv, dg):
    """Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij).

    ``dg[:, l, i, j]`` holds d_l g_ij.
    """
    # t[:, i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    t = np.einsum("aijl->aijl", dg) + np.einsum("ajil->aijl", dg) - np.einsum("alij->aijl", dg)
    return 0.5 * np.einsum("akl,aijl->akij", g_inv, t)


def sampled_metric_derivatives(g, grid):
    """d_l g_ij of a sampled metric by np.gradient (second order everywhere)."""
    n = grid.n
    G = g.reshape(*grid.m, n, n)
    grads = np.gradient(G, *grid.h, axis=tuple(range(n)), edge_order=2)
    return np.stack([d.reshape(-1, n, n) for d in grads], axis=1)


def _check_spd(g, grid):
    w = np.linalg.eigvalsh(g)
    bad = np.nonzero(~(w[:, 0] > 0))[0]
    if bad.size:
        idx = grid.multi_index(bad[0])
        raise MetricError(f"metric not SPD at grid point {idx}", index=idx)


class MetricField:
    """Metric, inverse and Christoffel symbols sampled on a grid.

    ``christoffel[:, k, i, j]`` holds Gamma^k_ij.
    """

    def __init__(self, grid, g, dg=None, christoffel_symbols=None, preset=None):
        g = np.asarray(g, dtype=float)
        g = 0.5 * (g + np.swapaxes(g, -1, -2))
        _check_spd(g, grid)
        self.grid = grid
        self.g = g
        self.g_inv = np.linalg.inv(g)
        self.g_inv = 0.5 * (self.g_inv + np.swapaxes(self.g_inv, -1, -2))
        self.preset = preset
        if christoffel_symbols is None:
            if dg is None:
                dg = sampled_metric_derivatives(g, grid)
            christoffel_symbols = christoffel_from_derivatives(self.g_inv, dg)
        self.christoffel = christoffel_symbols

    @classmethod
    def from_preset(cls, grid, preset, method="analytic"):
        """Sample a preset; Christoffel symbols analytic or by finite differences."""
        x = grid.points
        g = preset.g(x)
        dg = preset.dg(x) if method == "analytic" else None
        if method not in ("analytic", "fd"):
            raise ValueError(f"unknown christoffel method {method!r}")
        return cls(grid, g, dg=dg, preset=preset)

    @classmethod
    def flat(cls, grid):
        return cls.from_preset(grid, FlatMetric(grid.n))

    @property
    def n(self):
        return self.grid.n

    @cached_property
    def hess_ops(self):
        """Sparse matrices H[a][b] with (H[a][b] @ u) = nabla_ab u."""
        ops = self.grid.ops
        n = self.n
        H = [[None] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                M = ops.d2[a][b].copy()
                for c in range(n):
                    gam = self.christoffel[:, c, a, b]
                    if np.any(gam != 0):
                        M = M - sp.diags(gam) @ ops.d1[c]
                H[a][b] = H[b][a] = M.tocsr()
        return H

    @cached_property
    def laplace_op(self):
        n = self.n
        L = None
        for a in range(n):
            for b in range(n):
                term = sp.diags(self.g_inv[:, a, b]) @ self.hess_ops[a][b]
                L = term if L is None else L + term
        return L.tocsr()


def christoffel(metric, grid=None):
    """Christoffel symbols of a metric.

    ``metric`` is either a :class:`MetricField` (its stored symbols are
    returned) or an array of sampled metric tensors on ``grid``, in which
    case the derivatives are taken by finite differences.
    """
    if isinstance(metric, MetricField):
        return metric.christoffel
    if grid is None:
        raise ValueError("a grid is required for sampled metrics")
    g = np.asarray(metric, dtype=float)
    _check_spd(g, grid)
    return christoffel_from_derivatives(np.linalg.inv(g), sampled_metric_derivatives(g, grid))


# -- tensors built from grid functions --------------------------------------

def symmetrize(T):
    return 0.5 * (T + np.swapaxes(T, -1, -2))


def gradient(u, grid):
    """Coordinate gradient (N, n) by central differences."""
    u = np.ravel(u)
    return np.stack([D @ u for D in grid.ops.d1], axis=1)


def covariant_hessian(u, metric):
    """nabla_ij u = d_i d_j u - Gamma^k_ij d_k u, shape (N, n, n)."""
    u = np.ravel(u)
    n = metric.n
    out = np.empty((u.size, n, n))
    for a in range(n):
        for b in range(a, n):
            out[:, a, b] = out[:, b, a] = metric.hess_ops[a][b] @ u
    return out


def trace_g(T, metric):
    """g^ij T_ij."""
    return np.einsum("aij,aij->a", metric.g_inv, T)


def laplacian(u, metric):
    """Laplace-Beltrami operator g^ij nabla_ij u."""
    return trace_g(covariant_hessian(u, metric), metric)


def chi1_of(chi, metric):
    """(tr_g chi / (n - 1)) g - chi."""
    chi = np.broadcast_to(chi, metric.g.shape)
    n = metric.n
    return (trace_g(chi, metric) / (n - 1))[:, None, None] * metric.g - chi


def eta_tensor(u, metric, chi, hess=None):
    """Delta u g - nabla^2 u + chi."""
    H = covariant_hessian(u, metric) if hess is None else hess
    lap = trace_g(H, metric)
    return symmetrize(lap[:, None, None] * metric.g - H + np.broadcast_to(chi, H.shape))


def gen_eigenvalues(hfield, metric, point=None):
    """Eigenvalues of the pencil (h, g), descending, with g-orthonormal frames.

    Parameters
    ----------
    hfield : (N, n, n) array
    metric : MetricField
    point : int or tuple, optional
        Restrict to one grid point (flat index or multi-index).

    Returns
    -------
    lam : (N, n) or (n,) array
    W : (N, n, n) or (n, n) array; column m is the eigenvector of lam[m]
    """
    g = metric.g
    h = symmetrize(np.broadcast_to(np.asarray(hfield, dtype=float), g.shape))
    if point is not None:
        i = metric.grid.flat_index(point)
        lam, W = _kernels.pencil_eig(h[i:i + 1], g[i:i + 1])
        return lam[0], W[0]
    return _kernels.pencil_eig(h, g)


def vector_norm_g(p, metric):
    return np.sqrt(np.maximum(np.einsum("aij,ai,aj->a", metric.g_inv, p, p), 0.0))


def tensor_norm_g(T, metric):
    """Frobenius norm of a (0,2) tensor measured with g."""
    A = metric.g_inv @ T
    return np.sqrt(np.maximum(np.einsum("aij,aji->a", A, A), 0.0))
