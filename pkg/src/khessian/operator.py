"""The nonlinear operator, its linearization and the subsolution check.

The equation is solved in the normalized form

    G(eta[u]) = sigma_k(lambda(eta[u])) ** (1/k) = f(x, u, grad u) ** (1/k)

with eta[u] = Delta u g - nabla^2 u + chi. Derivative tensors use the
coordinate convention G^ij = dG/d eta_ij (contravariant), so that

    F^ij = dF/dU_ij = (g_st G^st) g^ij - G^ij,   U = nabla^2 u + chi_1.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import AdmissibilityError
from .geometry import covariant_hessian, eta_tensor, gradient
from .symfun import mu_inverse


@dataclass
class OperatorEval:
    """Operator value and derivative tensors at one grid point."""

    value: float
    Gij: Optional[np.ndarray]
    Fij: Optional[np.ndarray]
    lambda_eta: np.ndarray
    lambda_U: np.ndarray
    margin: float


@dataclass
class FieldEval:
    """Pointwise operator data on the whole grid."""

    hess: np.ndarray
    eta: np.ndarray
    lam: np.ndarray
    W: np.ndarray
    sig: np.ndarray
    margin: np.ndarray
    value: np.ndarray
    G: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None


def spectral_data(eta, metric, k, derivs=True):
    """Eigen-decompose eta against g and evaluate G and its derivatives.

    At points with non-positive margin the value is nan and the
    derivative tensors are zero.
    """
    lam, W = _kernels.pencil_eig(eta, metric.g)
    sig = _kernels.elem_sym(lam, k)
    margin = sig[:, 1:].min(axis=1)
    ok = margin > 0
    sk = np.where(ok, sig[:, k], 1.0)
    logs = np.log(sk)
    value = np.where(ok, np.exp(logs / k), np.nan)
    G = F = None
    if derivs:
        dsk = _kernels.elem_sym_deleted(lam, k - 1)
        dG = np.where(ok[:, None], dsk * (np.exp((1.0 / k - 1.0) * logs) / k)[:, None], 0.0)
        G = _kernels.spectral_grad(W, dG)
        trG = np.einsum("aij,aij->a", metric.g, G)
        F = trG[:, None, None] * metric.g_inv - G
    return lam, W, sig, margin, value, G, F


def eval_field(u, metric, chi, k, derivs=True):
    """Evaluate the operator at every grid point."""
    H = covariant_hessian(u, metric)
    eta = eta_tensor(u, metric, chi, hess=H)
    lam, W, sig, margin, value, G, F = spectral_data(eta, metric, k, derivs)
    return FieldEval(H, eta, lam, W, sig, margin, value, G, F)


def eval_point(u, metric, chi, k, point):
    """Operator value and derivative tensors at one grid point.

    Raises
    ------
    AdmissibilityError
        If lambda(eta) is not in Gamma_k at the point.
    """
    grid = metric.grid
    i = grid.flat_index(point)
    fe = eval_field(u, metric, chi, k)
    lam = fe.lam[i]
    if not fe.margin[i] > 0:
        raise AdmissibilityError(f"inadmissible point {grid.multi_index(i)} (margin {fe.margin[i]:.3e})",
                                 margin=float(fe.margin[i]), index=grid.multi_index(i))
    lam_U = np.sort(mu_inverse(lam))[::-1]
    return OperatorEval(float(fe.value[i]), fe.G[i], fe.F[i], lam, lam_U, float(fe.margin[i]))


@dataclass
class State:
    """Residual evaluation of a grid function for a given right-hand side."""

    u: np.ndarray
    field: FieldEval
    grad: np.ndarray
    f: np.ndarray
    ftilde: np.ndarray
    residual: np.ndarray
    min_margin: float
    worst: int
    admissible: bool


def admissibility_threshold(lam, cone_margin):
    return cone_margin * (1.0 + np.abs(lam).max(axis=1))


def evaluate(u, prob, rhs=None, derivs=False, cone_margin=0.0):
    """Evaluate residual data; never raises on inadmissible points.

    The right-hand side is only queried at interior points.
    """
    rhs = prob.rhs if rhs is None else rhs
    grid = prob.grid
    interior = grid.interior
    u = np.asarray(u, dtype=float).ravel()
    fe = eval_field(u, prob.metric, prob.chi, prob.k, derivs=derivs)
    p = gradient(u, grid)
    xi = grid.points[interior]
    f_int = rhs.f(xi, u[interior], p[interior])
    if np.any(~(f_int > 0)):
        raise ValueError("right-hand side must be positive at interior points")
    f = np.ones(grid.size)
    f[interior] = f_int
    ftilde = f ** (1.0 / prob.k)
    slack = fe.margin - admissibility_threshold(fe.lam, cone_margin)
    slack_int = np.where(interior, slack, np.inf)
    worst = int(np.argmin(slack_int))
    admissible = bool(slack_int[worst] > 0)
    R = np.where(interior, fe.value - ftilde, u - prob.phi)
    return State(u, fe, p, f, ftilde, R, float(fe.margin[interior].min()), worst, admissible)


def _raise_inadmissible(state, grid):
    idx = grid.multi_index(state.worst)
    m = float(state.field.margin[state.worst])
    raise AdmissibilityError(f"grid function not admissible at {idx} (margin {m:.3e})", margin=m, index=idx)


def residual(u, prob, rhs=None):
    """Interior: G(eta[u]) - f^{1/k}; boundary: u - phi."""
    st = evaluate(u, prob, rhs)
    if not st.admissible:
        _raise_inadmissible(st, prob.grid)
    return st.residual


def jacobian_from_state(state, prob, rhs=None):
    """Exact Jacobian of the discrete residual at ``state``.

    Interior rows discretize F^ij nabla_ij w - ftilde_{p_l} d_l w
    - ftilde_z w; boundary rows are the identity.
    """
    rhs = prob.rhs if rhs is None else rhs
    grid = prob.grid
    metric = prob.metric
    n = grid.n
    k = prob.k
    interior = grid.interior
    F = state.field.F
    J = None
    for a in range(n):
        for b in range(a, n):
            coef = F[:, a, b] if a == b else F[:, a, b] + F[:, b, a]
            term = sp.diags(coef) @ metric.hess_ops[a][b]
            J = term if J is None else J + term
    xi = grid.points[interior]
    u_i = state.u[interior]
    p_i = state.grad[interior]
    scale = np.zeros(grid.size)
    scale[interior] = state.f[interior] ** (1.0 / k - 1.0) / k
    fz = np.zeros(grid.size)
    fz[interior] = rhs.f_z(xi, u_i, p_i)
    fp = np.zeros((grid.size, n))
    fp[interior] = rhs.f_p(xi, u_i, p_i)
    J = J - sp.diags(scale * fz)
    for l in range(n):
        if np.any(fp[:, l] != 0):
            J = J - sp.diags(scale * fp[:, l]) @ grid.ops.d1[l]
    mask = interior.astype(float)
    J = sp.diags(mask) @ J + sp.diags(1.0 - mask)
    return J.tocsr()


def linearize(u, prob, rhs=None):
    """Sparse Jacobian of :func:`residual` at ``u``."""
    st = evaluate(u, prob, rhs, derivs=True)
    if not st.admissible:
        _raise_inadmissible(st, prob.grid)
    return jacobian_from_state(st, prob, rhs)


@dataclass
class SubsolutionReport:
    ok: bool
    min_slack: float
    eps0: float
    admissible: bool
    worst_index: tuple


def base_sigma(prob):
    """sigma_k(lambda(eta[usub])) on the whole grid."""
    fe = eval_field(prob.usub, prob.metric, prob.chi, prob.k, derivs=False)
    return fe.sig[:, prob.k], fe


def check_subsolution(prob, max_halvings=20):
    """Check sigma_k(eta[usub]) >= f(x, usub, grad usub) at interior points.

    ``eps0`` is the largest 2^-j (j <= max_halvings, so resolution about
    1e-6) such that lambda(eta[usub] - eps g) stays in Gamma_k at every
    interior point; zero if there is none.
    """
    grid = prob.grid
    interior = grid.interior
    s, fe = base_sigma(prob)
    p = gradient(prob.usub, grid)
    f = prob.rhs.f(grid.points[interior], prob.usub[interior], p[interior])
    slack = s[interior] - f
    worst = int(np.argmin(slack))
    admissible = bool(np.all(fe.margin[interior] > 0))
    lam = fe.lam[interior]
    eps0 = 0.0
    for j in range(max_halvings + 1):
        eps = 2.0 ** -j
        m = _kernels.elem_sym(lam - eps, prob.k)[:, 1:].min(axis=1)
        if np.all(m > 0):
            eps0 = eps
            break
    widx = grid.multi_index(np.flatnonzero(interior)[worst])
    return SubsolutionReport(bool(slack.min() >= 0) and admissible, float(slack.min()), eps0, admissible, widx)
