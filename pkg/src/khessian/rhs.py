"""Right-hand sides f(x, z, p) and their partial derivatives.

All evaluators are vectorized: ``x`` is (N, n), ``z`` is (N,), ``p`` is
(N, n). Subclasses override the partials they know analytically; the
others fall back to central differences with step ``fd_step``.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .geometry import christoffel_from_derivatives, symmetrize


@dataclass
class Growth:
    """Parameters of the gradient growth condition.

    ``fbar(x, z)`` must be positive; ``gamma1 < 2`` and ``gamma2 < 4``.
    """

    gamma1: float
    gamma2: float
    fbar: Callable

    def __post_init__(self):
        if not 0 < self.gamma1 < 2:
            raise ValueError("gamma1 must lie in (0, 2)")
        if not 0 < self.gamma2 < 4:
            raise ValueError("gamma2 must lie in (0, 4)")


class RHSSpec:
    """Base class for right-hand sides."""

    fd_step = 1e-6
    growth = None
    has_partials = True

    def f(self, x, z, p):
        raise NotImplementedError

    def f_z(self, x, z, p):
        s = self.fd_step
        return (self.f(x, z + s, p) - self.f(x, z - s, p)) / (2 * s)

    def f_p(self, x, z, p):
        s = self.fd_step
        out = np.empty_like(p, dtype=float)
        for l in range(p.shape[1]):
            e = np.zeros(p.shape[1])
            e[l] = s
            out[:, l] = (self.f(x, z, p + e) - self.f(x, z, p - e)) / (2 * s)
        return out

    def f_x(self, x, z, p):
        s = self.fd_step
        out = np.empty_like(x, dtype=float)
        for l in range(x.shape[1]):
            e = np.zeros(x.shape[1])
            e[l] = s
            out[:, l] = (self.f(x + e, z, p) - self.f(x - e, z, p)) / (2 * s)
        return out


class ConstantRHS(RHSSpec):
    def __init__(self, value, growth=None):
        if value <= 0:
            raise ValueError("f must be positive")
        self.value = float(value)
        self.growth = growth

    def f(self, x, z, p):
        return np.full(len(z), self.value)

    def f_z(self, x, z, p):
        return np.zeros(len(z))

    def f_p(self, x, z, p):
        return np.zeros_like(p, dtype=float)

    def f_x(self, x, z, p):
        return np.zeros_like(x, dtype=float)


class Factor:
    """Product of scalar terms in one variable s.

    A term is ``("poly", coeffs, power)`` meaning (sum_j c_j s^j)^power
    or ``("exp", rate, scale)`` meaning scale * exp(rate * s).
    """

    def __init__(self, terms=()):
        self.terms = list(terms)

    @classmethod
    def from_config(cls, items):
        terms = []
        for item in items or ():
            if "poly" in item:
                terms.append(("poly", np.asarray(item["poly"], dtype=float), float(item.get("power", 1.0))))
            elif "exp" in item:
                terms.append(("exp", float(item["exp"]), float(item.get("scale", 1.0))))
            else:
                raise ValueError(f"unknown factor term {item!r}")
        return cls(terms)

    def __call__(self, s):
        """Return (value, derivative) at s."""
        s = np.asarray(s, dtype=float)
        val = np.ones_like(s)
        dlog = np.zeros_like(s)
        for kind, a, b in self.terms:
            if kind == "poly":
                q = np.polynomial.polynomial.polyval(s, a)
                dq = np.polynomial.polynomial.polyval(s, np.polynomial.polynomial.polyder(a))
                val = val * q**b
                dlog = dlog + b * dq / q
            else:
                val = val * b * np.exp(a * s)
                dlog = dlog + a
        return val, val * dlog


class SeparableRHS(RHSSpec):
    """f = a(|x|^2) * b(z) * c(|p|^2) with analytic partials."""

    def __init__(self, a=None, b=None, c=None, growth=None):
        self.a = a or Factor()
        self.b = b or Factor()
        self.c = c or Factor()
        self.growth = growth

    def _parts(self, x, z, p):
        a, da = self.a(np.sum(x * x, axis=1))
        b, db = self.b(z)
        c, dc = self.c(np.sum(p * p, axis=1))
        return a, da, b, db, c, dc

    def f(self, x, z, p):
        a, _, b, _, c, _ = self._parts(x, z, p)
        return a * b * c

    def f_z(self, x, z, p):
        a, _, b, db, c, _ = self._parts(x, z, p)
        return a * db * c

    def f_p(self, x, z, p):
        a, _, b, _, c, dc = self._parts(x, z, p)
        return (a * b * dc)[:, None] * 2.0 * p

    def f_x(self, x, z, p):
        a, da, b, _, c, _ = self._parts(x, z, p)
        return (da * b * c)[:, None] * 2.0 * x


def analytic_eta(exact, metric_preset, chi_fn, x):
    """eta[u*] = Delta u g - nabla^2 u + chi at points x from analytic data."""
    g = metric_preset.g(x)
    g_inv = np.linalg.inv(g)
    dg = metric_preset.dg(x)
    gam = christoffel_from_derivatives(g_inv, dg)
    H = exact.hess(x) - np.einsum("akij,ak->aij", gam, exact.grad(x))
    lap = np.einsum("aij,aij->a", g_inv, H)
    return symmetrize(lap[:, None, None] * g - H + chi_fn(x, g)), g


def sigma_k_of_tensor(eta, g, k):
    lam, _ = _kernels.pencil_eig(eta, g)
    return _kernels.elem_sym(lam, k)[:, k]


class ManufacturedRHS(RHSSpec):
    """f built so that a chosen analytic u* solves the equation exactly.

    f(x, z, p) = s(x) * b(z) / b(u*(x)) * c(|p|^2) / c(|grad u*(x)|^2),
    where s = sigma_k(lambda(eta[u*])) is evaluated analytically.
    """

    def __init__(self, exact, metric_preset, chi_fn, k, b=None, c=None, growth=None):
        self.exact = exact
        self.metric_preset = metric_preset
        self.chi_fn = chi_fn
        self.k = k
        self.b = b or Factor()
        self.c = c or Factor()
        self.growth = growth
        self._cache = (None, None)

    def base(self, x):
        cx, cval = self._cache
        if cx is not None and cx.shape == x.shape and np.array_equal(cx, x):
            return cval
        eta, g = analytic_eta(self.exact, self.metric_preset, self.chi_fn, x)
        val = sigma_k_of_tensor(eta, g, self.k)
        self._cache = (np.array(x, copy=True), val)
        return val

    def _parts(self, x, z, p):
        s = self.base(x)
        b0, _ = self.b(self.exact.value(x))
        gu = self.exact.grad(x)
        c0, _ = self.c(np.sum(gu * gu, axis=1))
        b, db = self.b(z)
        c, dc = self.c(np.sum(p * p, axis=1))
        scale = s / (b0 * c0)
        return scale, b, db, c, dc

    def f(self, x, z, p):
        scale, b, _, c, _ = self._parts(x, z, p)
        return scale * b * c

    def f_z(self, x, z, p):
        scale, _, db, c, _ = self._parts(x, z, p)
        return scale * db * c

    def f_p(self, x, z, p):
        scale, b, _, _, dc = self._parts(x, z, p)
        return (scale * b * dc)[:, None] * 2.0 * p


class FrozenRHS(RHSSpec):
    """A grid field frozen as a function of x alone.

    ``f`` must be called with all grid points in grid order.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def f(self, x, z, p):
        if len(z) != self.values.size:
            raise ValueError("FrozenRHS evaluated off its grid")
        return self.values.copy()

    def f_z(self, x, z, p):
        return np.zeros(len(z))

    def f_p(self, x, z, p):
        return np.zeros_like(p, dtype=float)

    def f_x(self, x, z, p):
        return np.zeros_like(x, dtype=float)


class HomotopyRHS(RHSSpec):
    """f_t = (1 - t) * base(x) + t * target(x, z, p)."""

    def __init__(self, target, base, t):
        self.target = target
        self.base = np.asarray(base, dtype=float)
        self.t = float(t)

    def f(self, x, z, p):
        if self.t == 0.0:
            return self.base.copy()
        return (1.0 - self.t) * self.base + self.t * self.target.f(x, z, p)

    def f_z(self, x, z, p):
        if self.t == 0.0:
            return np.zeros(len(z))
        return self.t * self.target.f_z(x, z, p)

    def f_p(self, x, z, p):
        if self.t == 0.0:
            return np.zeros_like(p, dtype=float)
        return self.t * self.target.f_p(x, z, p)
