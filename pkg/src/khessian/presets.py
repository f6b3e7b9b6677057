"""Analytic functions, chi tensors and bubbles used to build problems."""
import numpy as np


class Quadratic:
    """u = scale / 2 * |x - center|^2 + offset."""

    def __init__(self, n, scale=1.0, center=None, offset=0.0):
        self.n = n
        self.scale = float(scale)
        self.center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        self.offset = float(offset)

    def value(self, x):
        d = x - self.center
        return 0.5 * self.scale * np.sum(d * d, axis=1) + self.offset

    def grad(self, x):
        return self.scale * (x - self.center)

    def hess(self, x):
        return np.broadcast_to(self.scale * np.eye(self.n), (len(x), self.n, self.n)).copy()


class ExpRadial:
    """u = amp * exp(rate / 2 * |x - center|^2) + offset."""

    def __init__(self, n, amp=1.0, rate=1.0, center=None, offset=0.0):
        self.n = n
        self.amp = float(amp)
        self.rate = float(rate)
        self.center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        self.offset = float(offset)

    def _e(self, x):
        d = x - self.center
        return self.amp * np.exp(0.5 * self.rate * np.sum(d * d, axis=1)), d

    def value(self, x):
        return self._e(x)[0] + self.offset

    def grad(self, x):
        e, d = self._e(x)
        return self.rate * e[:, None] * d

    def hess(self, x):
        e, d = self._e(x)
        r = self.rate
        return e[:, None, None] * (r * np.eye(self.n) + r * r * d[:, :, None] * d[:, None, :])


class Linear:
    """u = coeffs . x + offset."""

    def __init__(self, n, coeffs=None, offset=0.0):
        self.n = n
        self.coeffs = np.zeros(n) if coeffs is None else np.asarray(coeffs, dtype=float)
        self.offset = float(offset)

    def value(self, x):
        return x @ self.coeffs + self.offset

    def grad(self, x):
        return np.broadcast_to(self.coeffs, x.shape).copy()

    def hess(self, x):
        return np.zeros((len(x), self.n, self.n))


class Sum:
    """Pointwise sum of analytic functions."""

    def __init__(self, parts):
        self.parts = list(parts)

    def value(self, x):
        return sum(p.value(x) for p in self.parts)

    def grad(self, x):
        return sum(p.grad(x) for p in self.parts)

    def hess(self, x):
        return sum(p.hess(x) for p in self.parts)


def function_preset(spec, n):
    """Build an analytic function from its declarative form."""
    kind = spec["type"]
    if kind == "quadratic":
        return Quadratic(n, spec.get("scale", 1.0), spec.get("center"), spec.get("offset", 0.0))
    if kind == "exp_radial":
        return ExpRadial(n, spec.get("amp", 1.0), spec.get("rate", 1.0), spec.get("center"),
                         spec.get("offset", 0.0))
    if kind == "linear":
        return Linear(n, spec.get("coeffs"), spec.get("offset", 0.0))
    if kind == "sum":
        return Sum(function_preset(p, n) for p in spec["parts"])
    raise ValueError(f"unknown function preset {kind!r}")


def bubble(grid):
    """Concave bump vanishing on the boundary, normalized to 1 at the center.

    b = 4n / sum_faces(1 / d_face) with d_face the distance to a face in
    units of the box width. The reciprocal of a sum of reciprocals of
    affine functions is concave, so subtracting a multiple of b from an
    admissible function keeps it admissible and can only raise sigma_k
    on a flat metric.
    """
    x = grid.points
    inv = np.zeros(grid.size)
    with np.errstate(divide="ignore"):
        for a in range(grid.n):
            lo, hi = grid.lo[a], grid.hi[a]
            inv += 1.0 / ((x[:, a] - lo) / (hi - lo)) + 1.0 / ((hi - x[:, a]) / (hi - lo))
        out = 4.0 * grid.n / inv
    out[grid.boundary] = 0.0
    return out


def chi_preset(spec, n):
    """Return a callable (x, g) -> (N, n, n) for a chi preset.

    Kinds: ``zero``; ``scalar`` (alpha * g); ``diag`` and ``matrix``
    (constant coordinate components).
    """
    kind = spec.get("type", "zero")
    if kind == "zero":
        return lambda x, g: np.zeros((len(x), n, n))
    if kind == "scalar":
        alpha = float(spec["alpha"])
        return lambda x, g: alpha * g
    if kind == "diag":
        D = np.diag(np.asarray(spec["values"], dtype=float))
        if D.shape != (n, n):
            raise ValueError(f"diag chi needs {n} values")
        return lambda x, g: np.broadcast_to(D, (len(x), n, n)).copy()
    if kind == "matrix":
        M = np.asarray(spec["values"], dtype=float)
        if M.shape != (n, n):
            raise ValueError(f"matrix chi needs shape {(n, n)}")
        M = 0.5 * (M + M.T)
        return lambda x, g: np.broadcast_to(M, (len(x), n, n)).copy()
    raise ValueError(f"unknown chi preset {kind!r}")
