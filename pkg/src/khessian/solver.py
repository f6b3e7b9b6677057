"""Damped Newton solver, continuity path and a priori estimate diagnostics."""
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import AdmissibilityError, NumericError
from .geometry import covariant_hessian, gradient, tensor_norm_g, trace_g, vector_norm_g
from .operator import (
    base_sigma,
    check_subsolution,
    evaluate,
    jacobian_from_state,
)
from .problem import ProblemSpec, build_problem  # noqa: F401  (re-exported)
from .rhs import FrozenRHS, HomotopyRHS

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    newton_tol: float = 1e-9
    max_newton: int = 50
    homotopy_dt0: float = 0.1
    homotopy_dt_min: float = 1e-4
    linesearch_shrink: float = 0.5
    linesearch_min_step: float = 1e-8
    cone_margin: float = 1e-12
    linear_tol: float = 1e-10
    linear_solver: str = "auto"
    direct_max: int = 20000

    def __post_init__(self):
        for name in ("newton_tol", "max_newton", "homotopy_dt0", "homotopy_dt_min",
                     "cone_margin", "linear_tol", "linesearch_min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.linesearch_shrink < 1:
            raise ValueError("linesearch_shrink must lie in (0, 1)")
        if self.linear_solver not in ("auto", "direct", "iterative"):
            raise ValueError(f"unknown linear_solver {self.linear_solver!r}")


@dataclass
class NewtonStats:
    status: str
    iterations: int
    residuals: list = field(default_factory=list)
    margins: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"


@dataclass
class SolveReport:
    converged: bool
    t_reached: float
    newton_iters_total: int
    residual_inf: float
    min_cone_margin: float
    sandwich_ok: bool
    min_gap_low: float
    min_gap_high: float
    c1_ratio: float
    c2_ratio: float
    c1_bound: float
    subsolution: dict
    subsolution_violated: bool
    stages: list
    timings: dict
    error_inf: float = float("nan")

    def to_dict(self):
        return asdict(self)


# -- linear algebra ----------------------------------------------------------

def _solve_linear(J, b, grid, cfg):
    """Solve J x = b where boundary rows of J are identity rows."""
    interior = np.flatnonzero(grid.interior)
    bnd = np.flatnonzero(grid.boundary)
    x = np.zeros_like(b)
    x[bnd] = b[bnd]
    Jc = J.tocsc()
    A = Jc[interior][:, interior]
    rhs = b[interior] - Jc[interior][:, bnd] @ x[bnd]
    method = cfg.linear_solver
    if method == "auto":
        method = "direct" if (grid.n == 2 or interior.size <= cfg.direct_max) else "iterative"
    if method == "direct":
        sol = sla.spsolve(A.tocsc(), rhs)
        if not np.all(np.isfinite(sol)):
            raise NumericError("sparse direct solve failed")
    else:
        sol = _amg_gmres(A, rhs, cfg.linear_tol)
    x[interior] = sol
    return x


def _amg_gmres(A, rhs, tol):
    import pyamg

    # the operator is negative definite-like; precondition its negation
    B = (-A).tocsr()
    ml = pyamg.smoothed_aggregation_solver(B, max_coarse=200)
    M = ml.aspreconditioner()
    nb = np.linalg.norm(rhs)
    if nb == 0:
        return np.zeros_like(rhs)
    sol, info = sla.gmres(B, -rhs, M=M, rtol=tol, atol=0.0, restart=60, maxiter=50)
    if info != 0:
        res = np.linalg.norm(B @ sol + rhs) / nb
        if not res <= 10 * tol:
            raise NumericError(f"GMRES did not converge (info={info}, relres={res:.2e})")
    return sol


# -- auxiliary linear problem ----------------------------------------------

def solve_aux_linear(prob, cfg=None):
    """Solve Delta phi + tr_g(chi) = 0 with phi on the boundary."""
    cfg = cfg or SolverConfig()
    grid = prob.grid
    mask = grid.interior.astype(float)
    A = sp.diags(mask) @ prob.metric.laplace_op + sp.diags(1.0 - mask)
    b = np.where(grid.interior, -trace_g(prob.chi, prob.metric), prob.phi)
    return _solve_linear(A.tocsr(), b, grid, cfg)


# -- Newton ---------------------------------------------------------------------

def newton_solve(prob, rhs, u0, cfg=None):
    """Damped Newton iteration for residual(u) = 0 with right-hand side ``rhs``.

    Each step starts at full length and shrinks until every interior point
    keeps a positive cone margin and the residual sup-norm decreases.

    Returns
    -------
    u : ndarray
    stats : NewtonStats
    """
    cfg = cfg or SolverConfig()
    grid = prob.grid
    u = np.array(u0, dtype=float).ravel()
    st = evaluate(u, prob, rhs, derivs=True, cone_margin=cfg.cone_margin)
    r = float(np.abs(st.residual).max())
    stats = NewtonStats("running", 0, [r], [st.min_margin], [])
    if not st.admissible:
        stats.status = "inadmissible_start"
        return u, stats
    while r > cfg.newton_tol:
        if stats.iterations >= cfg.max_newton:
            stats.status = "max_iterations"
            return u, stats
        J = jacobian_from_state(st, prob, rhs)
        try:
            delta = _solve_linear(J, -st.residual, grid, cfg)
        except NumericError as exc:
            log.debug("linear solve failed: %s", exc)
            stats.status = "linear_solve_failure"
            return u, stats
        s = 1.0
        accepted = None
        while s >= cfg.linesearch_min_step:
            trial = u + s * delta
            try:
                st_t = evaluate(trial, prob, rhs, derivs=True, cone_margin=cfg.cone_margin)
            except ValueError:
                st_t = None
            if st_t is not None and st_t.admissible:
                r_t = float(np.abs(st_t.residual).max())
                if r_t < r:
                    accepted = (trial, st_t, r_t)
                    break
            s *= cfg.linesearch_shrink
        if accepted is None:
            stats.status = "linesearch_failure"
            return u, stats
        u, st, r = accepted
        stats.iterations += 1
        stats.residuals.append(r)
        stats.margins.append(st.min_margin)
        stats.steps.append(s)
        log.debug("newton it=%d step=%.3g res=%.3e margin=%.3e", stats.iterations, s, r, st.min_margin)
    stats.status = "converged"
    return u, stats


def frozen_base_rhs(prob):
    """f frozen to sigma_k(lambda(eta[usub])) at the interior points."""
    s, _ = base_sigma(prob)
    return FrozenRHS(s[prob.grid.interior])


def continuity_solve(prob, cfg=None):
    """Solve the problem by continuation from the subsolution.

    The path is f_t = (1 - t) sigma_k(lambda(eta[usub])) + t f, whose
    t = 0 member is solved exactly by usub. Each stage is a warm-started
    Newton solve; the step in t grows by 1.5 after a success and halves
    after a failure.

    Returns
    -------
    u : ndarray
    report : SolveReport
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    grid = prob.grid
    interior = grid.interior
    sub = check_subsolution(prob)
    if not sub.admissible:
        raise AdmissibilityError("subsolution is not admissible", index=sub.worst_index)
    base, _ = base_sigma(prob)
    base_i = base[interior]

    u = prob.usub.copy()
    t, dt = 0.0, cfg.homotopy_dt0
    stages = []
    total = 0
    min_margin = np.inf
    last_res = 0.0
    while t < 1.0:
        t_next = min(1.0, t + dt)
        rhs_t = HomotopyRHS(prob.rhs, base_i, t_next)
        u_new, stats = newton_solve(prob, rhs_t, u, cfg)
        total += stats.iterations
        stages.append({"t": t_next, "status": stats.status, "iterations": stats.iterations,
                       "residuals": stats.residuals, "margins": stats.margins, "steps": stats.steps})
        if stats.converged:
            min_margin = min(min_margin, min(stats.margins))
            u, t = u_new, t_next
            last_res = stats.residuals[-1]
            dt *= 1.5
        else:
            dt *= 0.5
            if dt < cfg.homotopy_dt_min:
                log.warning("continuation stalled at t=%.4g", t)
                break
    t_solve = time.perf_counter() - t0

    phibar = solve_aux_linear(prob, cfg)
    sw = verify_sandwich(u, prob, phibar)
    diag = c2_diagnostics(u, prob)
    if t < 1.0:
        last_res = float(np.abs(evaluate(u, prob, HomotopyRHS(prob.rhs, base_i, 1.0)).residual).max())
    converged = t >= 1.0 and last_res <= cfg.newton_tol
    err = float(np.abs(u - prob.exact).max()) if prob.exact is not None else float("nan")
    report = SolveReport(
        converged=bool(converged),
        t_reached=float(t),
        newton_iters_total=int(total),
        residual_inf=float(last_res),
        min_cone_margin=float(min_margin),
        sandwich_ok=sw["ok"],
        min_gap_low=sw["min_gap_low"],
        min_gap_high=sw["min_gap_high"],
        c1_ratio=diag["grad_ratio"],
        c2_ratio=diag["ratio"],
        c1_bound=diag["c1_bound"],
        subsolution={"ok": sub.ok, "min_slack": sub.min_slack, "eps0": sub.eps0},
        subsolution_violated=not sub.ok,
        stages=stages,
        timings={"solve": t_solve, "total": time.perf_counter() - t0},
        error_inf=err,
    )
    return u, report


# -- diagnostics ------------------------------------------------------------------

def verify_sandwich(u, prob, phibar=None, cfg=None):
    """Check usub - tol <= u <= phibar + tol, tol = 10 h^2 scale."""
    if phibar is None:
        phibar = solve_aux_linear(prob, cfg)
    u = np.ravel(u)
    scale = max(1.0, float(np.abs(phibar).max()), float(np.abs(prob.usub).max()))
    tol = 10.0 * prob.grid.hmax**2 * scale
    low = float((u - prob.usub).min())
    high = float((phibar - u).min())
    return {"ok": bool(low >= -tol and high >= -tol), "min_gap_low": low, "min_gap_high": high, "tol": tol}


def c2_diagnostics(u, prob):
    """Empirical constants of the a priori estimates.

    Sup-norms are taken over the closed grid and over its boundary nodes;
    ``ratio = sup|nabla^2 u| / (1 + sup_bdry|nabla^2 u|)`` and
    ``grad_ratio`` is the analogue for the gradient. Norms are measured
    with g. Boundary derivatives use one-sided stencils.
    """
    grid = prob.grid
    metric = prob.metric
    H = covariant_hessian(u, metric)
    hn = tensor_norm_g(H, metric)
    gn = vector_norm_g(gradient(u, grid), metric)
    b = grid.boundary
    sup_h, bnd_h = float(hn.max()), float(hn[b].max())
    sup_g, bnd_g = float(gn.max()), float(gn[b].max())
    return {
        "interior_sup_hess": float(hn[~b].max()),
        "sup_hess": sup_h,
        "boundary_sup_hess": bnd_h,
        "ratio": sup_h / (1.0 + bnd_h),
        "sup_grad": sup_g,
        "boundary_sup_grad": bnd_g,
        "grad_ratio": sup_g / (1.0 + bnd_g),
        "c1_bound": float(np.abs(u).max()) + bnd_g,
    }
