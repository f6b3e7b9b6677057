import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from khessian.errors import MetricError
from khessian.geometry import (
    ConformalMetric,
    DiagPolyMetric,
    FlatMetric,
    Grid,
    MetricField,
    chi1_of,
    christoffel,
    covariant_hessian,
    eta_tensor,
    gen_eigenvalues,
    gradient,
    laplacian,
    metric_preset,
    tensor_norm_g,
    trace_g,
    vector_norm_g,
)


def sympy_christoffel(g, xs):
    n = len(xs)
    gi = g.inv()
    return [[[sympy.simplify(sum(gi[k, l] * (sympy.diff(g[j, l], xs[i]) + sympy.diff(g[i, l], xs[j])
                                             - sympy.diff(g[i, j], xs[l])) for l in range(n)) / 2)
              for j in range(n)] for i in range(n)] for k in range(n)]


def lambdify_field(expr, xs, pts):
    f = sympy.lambdify(xs, expr, "numpy")
    return np.broadcast_to(np.asarray(f(*pts.T), dtype=float), (len(pts),))


class TestGrid:
    def test_basic(self):
        g = Grid([0, 0], [1, 2], [5, 9])
        np.testing.assert_allclose(g.h, [0.25, 0.25])
        assert g.size == 45
        assert g.boundary.sum() == 45 - 3 * 7
        assert g.points.shape == (45, 2)
        np.testing.assert_array_equal(g.points[g.flat_index((1, 2))], [0.25, 0.5])
        assert g.multi_index(g.flat_index((3, 4))) == (3, 4)

    def test_refined(self):
        g = Grid([0, 0, 0], [1, 1, 1], [5, 5, 5]).refined()
        assert g.m == (9, 9, 9)
        np.testing.assert_allclose(g.h, 0.125)

    @pytest.mark.parametrize("lo,hi,m", [([0], [1], [5]), ([0, 0], [1, 0], [5, 5]),
                                         ([0, 0], [1, 1], [4, 5]), ([0] * 4, [1] * 4, [5] * 4)])
    def test_invalid(self, lo, hi, m):
        with pytest.raises(ValueError):
            Grid(lo, hi, m)


class TestDifferences:
    def test_exact_on_quadratics(self):
        grid = Grid([-1, 0.5], [1, 2], [7, 9])
        x, y = grid.points.T
        u = 1 + 2 * x - y + 3 * x * x - x * y + 0.5 * y * y
        ops = grid.ops
        np.testing.assert_allclose(ops.d1[0] @ u, 2 + 6 * x - y, atol=1e-12)
        np.testing.assert_allclose(ops.d1[1] @ u, -1 - x + y, atol=1e-12)
        np.testing.assert_allclose(ops.d2[0][0] @ u, 6, atol=1e-10)
        np.testing.assert_allclose(ops.d2[1][1] @ u, 1, atol=1e-10)
        np.testing.assert_allclose(ops.d2[0][1] @ u, -1, atol=1e-10)

    def test_second_difference_boundary_exact_on_cubics(self):
        grid = Grid([0, 0], [1, 1], [6, 6])
        x = grid.points[:, 0]
        np.testing.assert_allclose(grid.ops.d2[0][0] @ x**3, 6 * x, atol=1e-9)


class TestChristoffel:
    def test_flat_zero(self):
        grid = Grid([0, 0, 0], [1, 1, 1], [5, 5, 5])
        assert np.all(christoffel(MetricField.flat(grid)) == 0)

    @pytest.mark.parametrize("method", ["analytic", "fd"])
    def test_polar_like(self, method):
        grid = Grid([0.5, 0], [1.5, 1], [41, 11])
        m = MetricField.from_preset(grid, DiagPolyMetric([(None, [1.0]), (0, [0, 0, 1.0])]), method)
        x1 = grid.points[:, 0]
        gam = christoffel(m)
        tol = 1e-12 if method == "analytic" else 1e-10
        np.testing.assert_allclose(gam[:, 0, 1, 1], -x1, atol=tol)
        np.testing.assert_allclose(gam[:, 1, 0, 1], 1 / x1, atol=tol)
        np.testing.assert_allclose(gam[:, 1, 1, 0], 1 / x1, atol=tol)
        np.testing.assert_allclose(gam[:, 0, 0, 0], 0, atol=tol)

    def test_constant_conformal_zero(self):
        grid = Grid([0, 0], [1, 1], [6, 6])
        m = MetricField.from_preset(grid, ConformalMetric(2, c0=0.7))
        assert np.all(m.christoffel == 0)
        assert np.abs(christoffel(m.g, grid)).max() < 1e-12

    @pytest.mark.parametrize("method", ["analytic", "fd"])
    def test_against_symbolic(self, method):
        xs = sympy.symbols("x0:3")
        psi = 0.1 + 0.2 * xs[0] - 0.1 * xs[2] + 0.3 * (xs[0] ** 2 + xs[1] ** 2 + xs[2] ** 2)
        gs = sympy.exp(2 * psi) * sympy.eye(3)
        ref = sympy_christoffel(gs, xs)
        grid = Grid([0, 0, 0], [1, 1, 1], [9, 9, 9])
        preset = ConformalMetric(3, c0=0.1, lin=[0.2, 0, -0.1], quad=0.3)
        m = MetricField.from_preset(grid, preset, method)
        errs = []
        for k in range(3):
            for i in range(3):
                for j in range(3):
                    exact = lambdify_field(ref[k][i][j], xs, grid.points)
                    errs.append(np.abs(m.christoffel[:, k, i, j] - exact).max())
                    np.testing.assert_allclose(m.christoffel[:, k, i, j], m.christoffel[:, k, j, i], atol=1e-14)
        assert max(errs) < (1e-12 if method == "analytic" else 0.05)

    def test_fd_second_order(self):
        preset = ConformalMetric(2, lin=[0.3, -0.2], quad=0.4)
        errs = []
        for mm in (17, 33, 65):
            grid = Grid([0, 0], [1, 1], [mm, mm])
            fd = MetricField.from_preset(grid, preset, "fd").christoffel
            an = MetricField.from_preset(grid, preset, "analytic").christoffel
            errs.append(np.abs(fd - an).max())
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(orders > 1.8)

    def test_not_spd_reports_index(self):
        grid = Grid([-1, -1], [1, 1], [5, 5])
        preset = DiagPolyMetric([(None, [1.0]), (0, [0.0, 1.0])])  # g_22 = x1 <= 0 on half the box
        with pytest.raises(MetricError) as ei:
            MetricField.from_preset(grid, preset)
        assert ei.value.index == (0, 0)

    def test_sampled_requires_grid(self):
        with pytest.raises(ValueError):
            christoffel(np.tile(np.eye(2), (25, 1, 1)))

    def test_inverse(self):
        grid = Grid([0, 0, 0], [1, 1, 1], [5, 5, 5])
        m = MetricField.from_preset(grid, metric_preset(
            {"type": "diag_poly", "diag": [{"coeffs": [1]}, {"axis": 0, "coeffs": [1, 0, 0.25]}, {"coeffs": [1]}]}, 3))
        np.testing.assert_allclose(m.g_inv @ m.g, np.broadcast_to(np.eye(3), m.g.shape), atol=1e-10)


class TestTensors:
    def test_hessian_quadratic_flat(self):
        grid = Grid([0, 0], [1, 1], [6, 6])
        m = MetricField.flat(grid)
        x, y = grid.points.T
        H = covariant_hessian((x * x + y * y) / 2, m)
        np.testing.assert_allclose(H, np.broadcast_to(np.eye(2), H.shape), atol=1e-10)
        assert np.abs(covariant_hessian(2 * x - 3 * y, m)).max() < 1e-10

    def test_hessian_polar_like(self):
        grid = Grid([0.5, 0], [1.5, 1], [11, 11])
        m = MetricField.from_preset(grid, DiagPolyMetric([(None, [1.0]), (0, [0, 0, 1.0])]))
        x1 = grid.points[:, 0]
        H = covariant_hessian(x1, m)
        np.testing.assert_allclose(H[:, 1, 1], x1, atol=1e-12)
        np.testing.assert_allclose(H[:, 0, 0], 0, atol=1e-10)

    def test_hessian_refinement_against_symbolic(self):
        xs = sympy.symbols("x0:2")
        gs = sympy.diag(1, 1 + xs[0] ** 2 / 4)
        us = sympy.exp(xs[0] / 2) * sympy.sin(xs[1] + 0.3)
        gam = sympy_christoffel(gs, xs)
        Hs = [[sympy.diff(us, xs[i], xs[j]) - sum(gam[k][i][j] * sympy.diff(us, xs[k]) for k in range(2))
               for j in range(2)] for i in range(2)]
        preset = DiagPolyMetric([(None, [1.0]), (0, [1.0, 0.0, 0.25])])
        errs = []
        for mm in (11, 21, 41):
            grid = Grid([0, 0], [1, 1], [mm, mm])
            m = MetricField.from_preset(grid, preset)
            u = lambdify_field(us, xs, grid.points)
            H = covariant_hessian(u, m)
            inner = grid.interior
            e = max(np.abs(H[inner, i, j] - lambdify_field(Hs[i][j], xs, grid.points)[inner]).max()
                    for i in range(2) for j in range(2))
            errs.append(e)
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(orders > 1.8), orders

    def test_laplacian(self):
        g2 = Grid([0, 0], [1, 1], [6, 6])
        x = g2.points
        np.testing.assert_allclose(laplacian(0.5 * np.sum(x * x, 1), MetricField.flat(g2)), 2, atol=1e-10)
        g3 = Grid([0, 0, 0], [1, 1, 1], [5, 5, 5])
        x = g3.points
        np.testing.assert_allclose(laplacian(0.5 * np.sum(x * x, 1), MetricField.flat(g3)), 3, atol=1e-10)
        m = MetricField.from_preset(g3, ConformalMetric(3, lin=[0.2, 0.1, 0], quad=0.3))
        assert np.abs(laplacian(np.full(g3.size, 4.2), m)).max() < 1e-12

    def test_chi1(self):
        grid = Grid([0, 0, 0], [1, 1, 1], [5, 5, 5])
        m = MetricField.from_preset(grid, ConformalMetric(3, lin=[0.2, 0.1, 0]))
        np.testing.assert_allclose(chi1_of(m.g, m), m.g / 2, rtol=1e-13)
        assert np.all(chi1_of(np.zeros_like(m.g), m) == 0)
        flat = MetricField.flat(grid)
        a, b, c = 1.0, 2.0, 4.0
        out = chi1_of(np.diag([a, b, c]), flat)
        np.testing.assert_allclose(out[0], np.diag([(b + c - a) / 2, (a + c - b) / 2, (a + b - c) / 2]))

    def test_eta_examples(self):
        grid = Grid([0, 0], [1, 1], [6, 6])
        m = MetricField.flat(grid)
        x = grid.points
        eta = eta_tensor(0.5 * np.sum(x * x, 1), m, np.zeros((grid.size, 2, 2)))
        np.testing.assert_allclose(eta, np.broadcast_to(np.eye(2), eta.shape), atol=1e-10)
        assert np.abs(eta_tensor(np.full(grid.size, 3.0), m, np.zeros((grid.size, 2, 2)))).max() < 1e-10

    def test_eta_equals_trace_form(self):
        grid = Grid([0, 0, 0], [1, 1, 1], [7, 7, 7])
        m = MetricField.from_preset(grid, DiagPolyMetric([(None, [1.0]), (0, [1.0, 0, 0.25]), (None, [1.0])]))
        x = grid.points
        u = np.exp(0.5 * np.sum(x * x, 1)) + x[:, 1] * x[:, 2]
        chi = 0.3 * m.g + np.array([[0.1, 0.2, 0], [0.2, -0.1, 0.05], [0, 0.05, 0.2]])
        U = covariant_hessian(u, m) + chi1_of(chi, m)
        rhs = trace_g(U, m)[:, None, None] * m.g - U
        np.testing.assert_allclose(eta_tensor(u, m, chi), rhs, atol=1e-10 * (1 + np.abs(rhs).max()))

    def test_norms(self):
        grid = Grid([0, 0], [1, 1], [5, 5])
        m = MetricField.from_preset(grid, ConformalMetric(2, c0=np.log(2.0)))  # g = 4 I
        np.testing.assert_allclose(vector_norm_g(np.ones((grid.size, 2)), m), np.sqrt(2) / 2)
        np.testing.assert_allclose(tensor_norm_g(m.g, m), np.sqrt(2))

    def test_gradient_shape(self):
        grid = Grid([0, 0, 0], [1, 1, 1], [5, 6, 7])
        p = gradient(grid.points @ np.array([1.0, 2.0, 3.0]), grid)
        np.testing.assert_allclose(p, np.broadcast_to([1.0, 2.0, 3.0], p.shape), atol=1e-12)


class TestGenEigenvalues:
    def setup_method(self):
        self.grid = Grid([0, 0], [1, 1], [5, 5])

    def test_identity_metric(self):
        m = MetricField.flat(self.grid)
        h = np.tile(np.array([[2.0, 1.0], [1.0, 2.0]]), (self.grid.size, 1, 1))
        lam, _ = gen_eigenvalues(h, m, point=(2, 2))
        np.testing.assert_allclose(lam, [3.0, 1.0])

    def test_scaled_metric(self):
        m = MetricField.from_preset(self.grid, FlatMetric(2))
        lam, _ = gen_eigenvalues(2.0 * m.g, m)
        np.testing.assert_allclose(lam, 2.0)

    def test_pencil_example(self):
        m = MetricField(self.grid, np.tile(np.diag([1.0, 4.0]), (self.grid.size, 1, 1)))
        lam, _ = gen_eigenvalues(np.diag([2.0, 8.0]), m, point=0)
        np.testing.assert_allclose(lam, [2.0, 2.0], rtol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_congruence_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = 3
        grid = Grid([0, 0, 0], [1, 1, 1], [5, 5, 5])
        B = rng.normal(size=(n, n))
        g = np.eye(n) + 0.5 * B @ B.T
        S = rng.normal(size=(n, n))
        h = S + S.T
        A = rng.normal(size=(n, n)) + 2 * np.eye(n)
        if abs(np.linalg.det(A)) < 1e-2:
            return
        m1 = MetricField(grid, np.tile(g, (grid.size, 1, 1)))
        m2 = MetricField(grid, np.tile(A.T @ g @ A, (grid.size, 1, 1)))
        l1, _ = gen_eigenvalues(np.tile(h, (grid.size, 1, 1)), m1, point=0)
        l2, _ = gen_eigenvalues(np.tile(A.T @ h @ A, (grid.size, 1, 1)), m2, point=0)
        np.testing.assert_allclose(l2, l1, rtol=1e-9, atol=1e-9 * np.abs(l1).max())
