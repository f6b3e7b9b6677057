from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conftest import general_spec, ma_spec
from khessian.errors import AdmissibilityError
from khessian.geometry import Grid, MetricField
from khessian.operator import evaluate
from khessian.presets import bubble
from khessian.problem import ProblemSpec, build_problem
from khessian.rhs import ConstantRHS
from khessian.solver import (
    SolverConfig,
    c2_diagnostics,
    continuity_solve,
    frozen_base_rhs,
    newton_solve,
    solve_aux_linear,
    verify_sandwich,
)
from khessian.symfun import ConeSpec


def exp_ma(m=17):
    rhs = {"type": "separable", "a": [{"exp": 1.0}, {"poly": [1.0, 1.0]}]}
    return build_problem(ma_spec(m=m, exact={"type": "exp_radial"}, rhs=rhs))


class TestConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert c.newton_tol == 1e-9 and c.max_newton == 50 and c.homotopy_dt0 == 0.1
        assert c.homotopy_dt_min == 1e-4 and c.linesearch_shrink == 0.5 and c.linear_tol == 1e-10

    @pytest.mark.parametrize("kw", [{"newton_tol": 0.0}, {"max_newton": -1}, {"linesearch_shrink": 1.0},
                                    {"linear_solver": "magic"}, {"homotopy_dt0": -0.1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestNewton:
    def test_frozen_base_zero_iterations(self):
        prob = build_problem(general_spec(k=2, metric="diag", alpha=1.0, m=7))
        u, stats = newton_solve(prob, frozen_base_rhs(prob), prob.usub)
        assert stats.converged and stats.iterations == 0
        assert np.array_equal(u, prob.usub)

    def test_monge_ampere_quadratic(self, ma_problem):
        u, stats = newton_solve(ma_problem, ma_problem.rhs, ma_problem.usub)
        assert stats.converged
        assert stats.residuals[-1] <= 1e-9
        assert np.abs(u - ma_problem.exact).max() < 1e-10

    def test_trace_invariants_and_quadratic_tail(self):
        prob = exp_ma()
        _, stats = newton_solve(prob, prob.rhs, prob.usub)
        assert stats.converged
        r = np.array(stats.residuals)
        assert np.all(np.diff(r) < 0)
        assert np.all(np.array(stats.margins) > 0)
        # convergence order from consecutive residuals below 1e-3, above the roundoff floor
        tail = r[(r < 1e-3) & (r > 1e-13)]
        orders = np.log(tail[1:]) / np.log(tail[:-1])
        assert len(orders) >= 1 and orders.max() >= 1.5

    def test_inadmissible_start(self, ma_problem):
        u, stats = newton_solve(ma_problem, ma_problem.rhs, -ma_problem.usub)
        assert stats.status == "inadmissible_start" and stats.iterations == 0

    def test_max_iterations(self):
        prob = exp_ma()
        _, stats = newton_solve(prob, prob.rhs, prob.usub, SolverConfig(max_newton=1))
        assert stats.status == "max_iterations" and stats.iterations == 1


class TestContinuity:
    def test_manufactured_exp(self):
        prob = exp_ma()
        cfg = SolverConfig()
        u, rep = continuity_solve(prob, cfg)
        assert rep.converged and rep.t_reached == 1.0 and rep.residual_inf <= cfg.newton_tol
        st = evaluate(u, prob)
        assert np.abs(st.residual[prob.grid.interior]).max() <= cfg.newton_tol
        assert rep.sandwich_ok and rep.min_cone_margin > 0
        for stage in rep.stages:
            assert all(m > 0 for m in stage["margins"])
        assert rep.error_inf < 5 * prob.grid.hmax**2 * 10

    def test_deterministic(self):
        u1, r1 = continuity_solve(exp_ma(m=13))
        u2, r2 = continuity_solve(exp_ma(m=13))
        assert np.array_equal(u1, u2)
        assert r1.newton_iters_total == r2.newton_iters_total

    def test_frozen_returns_subsolution(self):
        prob = build_problem(general_spec(k=3, m=7))
        frozen = ProblemSpec(prob.grid, prob.cone, prob.metric, prob.chi, frozen_base_rhs(prob), prob.phi, prob.usub)
        u, rep = continuity_solve(frozen)
        assert rep.converged and rep.newton_iters_total == 0
        assert np.array_equal(u, prob.usub)

    def test_slack_preserved_along_path(self):
        prob = exp_ma(m=9)
        from khessian.operator import base_sigma

        s, _ = base_sigma(prob)
        inner = prob.grid.interior
        st = evaluate(prob.usub, prob)
        f = st.f[inner]
        for t in np.linspace(0, 1, 11):
            assert np.all(s[inner] >= (1 - t) * s[inner] + t * f)

    def test_inadmissible_subsolution_raises(self, ma_problem):
        bad = ProblemSpec(ma_problem.grid, ma_problem.cone, ma_problem.metric, ma_problem.chi, ma_problem.rhs,
                          ma_problem.phi, ma_problem.phi + 2.0 * bubble(ma_problem.grid))
        with pytest.raises(AdmissibilityError):
            continuity_solve(bad)

    def test_subsolution_violation_is_reported(self):
        spec = ma_spec(m=9, exact={"type": "quadratic", "scale": 2.0},
                       rhs={"type": "constant", "value": 10.0}, usub={})
        _, rep = continuity_solve(build_problem(spec))
        assert rep.subsolution_violated and rep.subsolution["min_slack"] == pytest.approx(-6.0)

    def test_iterative_matches_direct(self):
        prob = build_problem(general_spec(k=2, metric="diag", alpha=1.0, m=9))
        u1, r1 = continuity_solve(prob, SolverConfig(linear_solver="direct"))
        u2, r2 = continuity_solve(prob, SolverConfig(linear_solver="iterative"))
        assert r1.converged and r2.converged
        assert np.abs(u1 - u2).max() < 1e-8

    def test_concurrent_solves_do_not_interfere(self):
        specs = [ma_spec(m=9, exact={"type": "exp_radial"},
                         rhs={"type": "separable", "a": [{"exp": 1.0}, {"poly": [1.0, 1.0]}]}),
                 general_spec(k=2, m=7)]
        serial = [continuity_solve(build_problem(s))[0] for s in specs]
        with ThreadPoolExecutor(2) as ex:
            par = list(ex.map(lambda s: continuity_solve(build_problem(s))[0], specs))
        for a, b in zip(serial, par):
            assert np.array_equal(a, b)


class TestAuxAndSandwich:
    def test_linear_boundary_data(self):
        spec = ma_spec(m=9, exact={"type": "linear", "coeffs": [1.0, 0.0]})
        spec["chi"] = {"type": "zero"}
        prob = build_problem(spec)
        phibar = solve_aux_linear(prob)
        np.testing.assert_allclose(phibar, prob.grid.points[:, 0], atol=1e-12)

    def test_positive_inside(self):
        grid = Grid([0, 0], [1, 1], [17, 17])
        prob = ProblemSpec(grid, ConeSpec(2, 2), MetricField.flat(grid), 2.0 * np.eye(2), ConstantRHS(1.0),
                           np.zeros(grid.size), np.zeros(grid.size))
        phibar = solve_aux_linear(prob)
        assert np.all(phibar[grid.interior] > 0)

    def test_second_order(self):
        # phibar = -(x^2 + y^2) / 2 + exp(x) sin(y) solves Delta phibar = -tr chi for chi = I
        errs = []
        for m in (9, 17, 33):
            grid = Grid([0, 0], [1, 1], [m, m])
            x, y = grid.points.T
            exact = -(x * x + y * y) / 2 + np.exp(x) * np.sin(y)
            prob = ProblemSpec(grid, ConeSpec(2, 2), MetricField.flat(grid), np.eye(2), ConstantRHS(1.0),
                               exact, exact)
            errs.append(np.abs(solve_aux_linear(prob) - exact).max())
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all((orders > 1.8) & (orders < 2.3))

    def test_gap_low_zero_at_subsolution(self, ma_problem):
        sw = verify_sandwich(ma_problem.usub, ma_problem)
        assert sw["min_gap_low"] == 0.0

    def test_approaches_harmonic_extension(self):
        gaps = []
        for fval in (1.0, 0.1, 0.01):
            spec = ma_spec(m=17, rhs={"type": "constant", "value": fval})
            spec["phi"] = spec.pop("exact")
            prob = build_problem(spec)
            u, rep = continuity_solve(prob)
            assert rep.converged and rep.sandwich_ok
            gaps.append(float((solve_aux_linear(prob) - u).max()))
        assert gaps[0] > gaps[1] > gaps[2] > 0


class TestDiagnostics:
    def test_quadratic(self, ma_problem):
        d = c2_diagnostics(ma_problem.exact, ma_problem)
        assert d["interior_sup_hess"] == pytest.approx(np.sqrt(2), rel=1e-10)
        assert d["boundary_sup_hess"] == pytest.approx(np.sqrt(2), rel=1e-10)
        assert d["ratio"] == pytest.approx(np.sqrt(2) / (1 + np.sqrt(2)), rel=1e-10)

    def test_linear(self):
        prob = build_problem(ma_spec(m=9, exact={"type": "linear", "coeffs": [1.0, 2.0]}))
        d = c2_diagnostics(prob.exact, prob)
        assert d["interior_sup_hess"] < 1e-10 and d["ratio"] < 1e-10
