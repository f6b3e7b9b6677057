"""Elementary symmetric functions, Garding cones and the operator h.

Conventions
-----------
A ``Lambda`` is a real vector of length n. Functions that accept a single
vector also accept a 2-d array of shape (N, n) and then act row-wise.
Indices are 0-based throughout.

For lam in R^n the mu-transform is ``mu_i = sum_{j != i} lam_j`` and

    h(lam) = sigma_k(mu) ** (1 / k),

defined on the cone Gamma = {lam : mu in Gamma_k}.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConeDomainError, NumericError


@dataclass(frozen=True)
class ConeSpec:
    """Dimension ``n`` and Hessian order ``k`` of the cone Gamma_k."""

    n: int
    k: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise ValueError("n and k must be integers")
        if self.n < 2:
            raise ValueError(f"dimension n={self.n} must be >= 2")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"order k={self.k} must satisfy 1 <= k <= n={self.n}")


@dataclass
class HEval:
    """Value and gradients of h at one point.

    ``grad`` holds dh/dlam_i, ``tilde_grad`` holds d sigma_k^{1/k}/d mu_i.
    """

    value: float
    grad: np.ndarray
    tilde_grad: np.ndarray


def _rows(lam):
    arr = np.asarray(lam, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError("expected a vector or a 2-d array of vectors")


def _check_cone(arr, cone):
    if arr.shape[1] != cone.n:
        raise ValueError(f"vector length {arr.shape[1]} does not match n={cone.n}")


def sigma(k, lam):
    """sigma_k(lam), with sigma_0 = 1."""
    arr, single = _rows(lam)
    n = arr.shape[1]
    if not 0 <= k <= n:
        raise ValueError(f"order k={k} outside [0, {n}]")
    out = _kernels.elem_sym(arr, k)[:, k]
    return float(out[0]) if single else out


def sigma_all(k, lam):
    """(N, k + 1) array of sigma_0..sigma_k for each row of ``lam``."""
    arr, _ = _rows(lam)
    if not 0 <= k <= arr.shape[1]:
        raise ValueError(f"order k={k} outside [0, {arr.shape[1]}]")
    return _kernels.elem_sym(arr, k)


def sigma_partial(k, i, lam):
    """sigma_k of ``lam`` with entry ``i`` deleted."""
    arr, single = _rows(lam)
    n = arr.shape[1]
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for n={n}")
    if not 0 <= k <= n - 1:
        raise ValueError(f"order k={k} outside [0, {n - 1}]")
    out = _kernels.elem_sym_deleted(arr, k)[:, i]
    return float(out[0]) if single else out


def sigma_deleted(k, lam):
    """(N, n) array of sigma_{k;i}(lam) for every index i."""
    arr, _ = _rows(lam)
    if not 0 <= k <= arr.shape[1] - 1:
        raise ValueError(f"order k={k} outside [0, {arr.shape[1] - 1}]")
    return _kernels.elem_sym_deleted(arr, k)


def gamma_k_margin(lam, cone):
    """min_{1<=j<=k} sigma_j(lam); positive iff lam lies in Gamma_k."""
    arr, single = _rows(lam)
    _check_cone(arr, cone)
    out = _kernels.elem_sym(arr, cone.k)[:, 1:].min(axis=1)
    return float(out[0]) if single else out


def in_gamma_k(lam, cone, margin=0.0):
    """True iff sigma_j(lam) > margin for j = 1..k."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    m = gamma_k_margin(lam, cone)
    return bool(m > margin) if np.ndim(m) == 0 else m > margin


def mu_transform(lam):
    """mu_i = sum_{j != i} lam_j.

    Summed directly rather than as sum(lam) - lam_i, which cancels small
    entries next to large ones.
    """
    arr = np.asarray(lam, dtype=np.float64)
    n = arr.shape[-1]
    return arr @ (np.ones((n, n)) - np.eye(n))


def mu_inverse(mu):
    """Inverse of :func:`mu_transform`: lam_i = sum(mu)/(n - 1) - mu_i."""
    arr = np.asarray(mu, dtype=np.float64)
    n = arr.shape[-1]
    if n < 2:
        raise ValueError("mu_inverse needs n >= 2")
    return arr.sum(axis=-1, keepdims=True) / (n - 1) - arr


def gamma_margin(lam, cone):
    """Cone margin of lam with respect to Gamma, i.e. of mu w.r.t. Gamma_k."""
    return gamma_k_margin(mu_transform(lam), cone)


def in_gamma(lam, cone, margin=0.0):
    """True iff mu_transform(lam) lies in Gamma_k with the given margin."""
    return in_gamma_k(mu_transform(lam), cone, margin)


def sigma_root_grad(lam, k):
    """Value and gradient of sigma_k^{1/k} at rows of ``lam`` inside Gamma_k.

    The factor sigma_k^{1/k - 1} is formed in log space since its exponent
    is negative and sigma_k may be tiny near the cone boundary.

    Returns
    -------
    value : (N,) array
    grad : (N, n) array
    sk : (N,) array of sigma_k
    """
    arr, _ = _rows(lam)
    sk = _kernels.elem_sym(arr, k)[:, k]
    if np.any(sk <= 0):
        raise ConeDomainError("sigma_k <= 0: point on or outside the cone boundary")
    dsk = _kernels.elem_sym_deleted(arr, k - 1)
    logs = np.log(sk)
    value = np.exp(logs / k)
    grad = dsk * (np.exp((1.0 / k - 1.0) * logs) / k)[:, None]
    return value, grad, sk


def h_batch(lam, cone):
    """Row-wise h, its gradient and the mu-gradient.

    Returns
    -------
    value : (N,) array
    grad : (N, n) array
        h_i = sum_{l != i} tilde_l.
    tilde : (N, n) array
        d sigma_k^{1/k} / d mu_i evaluated at mu(lam).
    """
    arr, _ = _rows(lam)
    _check_cone(arr, cone)
    mu = mu_transform(arr)
    if np.any(gamma_k_margin(mu, cone) <= 0):
        raise ConeDomainError("lam outside Gamma")
    value, tilde, _ = sigma_root_grad(mu, cone.k)
    grad = tilde.sum(axis=1, keepdims=True) - tilde
    return value, grad, tilde


def h_eval(lam, cone):
    """Evaluate h, dh/dlam and d sigma_k^{1/k}/dmu at a single point."""
    arr = np.asarray(lam, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("h_eval takes a single vector; use h_batch for arrays")
    value, grad, tilde = h_batch(arr[None, :], cone)
    return HEval(float(value[0]), grad[0], tilde[0])


def h_value(lam, cone):
    """h at rows of lam; zero on the boundary of Gamma, nan outside."""
    arr, single = _rows(lam)
    mu = mu_transform(arr)
    margin = gamma_k_margin(mu, cone)
    sk = _kernels.elem_sym(mu, cone.k)[:, cone.k]
    out = np.where(margin > 0, np.abs(sk) ** (1.0 / cone.k), np.nan)
    out = np.where((margin >= 0) & (sk == 0), 0.0, out)
    return float(out[0]) if single else out


def find_shift_R(lam, cone, A, rtol=1e-8, max_doublings=200):
    """Smallest R >= 0 with h(lam + R e_n) >= A.

    Brackets by doubling, then bisects to relative tolerance ``rtol``.
    """
    if A <= 0:
        raise ValueError("A must be positive")
    lam = np.asarray(lam, dtype=np.float64)
    if not in_gamma(lam, cone):
        raise ConeDomainError("lam outside Gamma")

    def h_at(R):
        shifted = lam.copy()
        shifted[-1] += R
        return h_eval(shifted, cone).value

    if h_at(0.0) >= A:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if h_at(hi) >= A:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericError(f"h did not reach A={A} after {max_doublings} doublings")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if h_at(mid) >= A:
            hi = mid
        else:
            lo = mid
    return hi
