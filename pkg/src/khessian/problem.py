"""Problem data and its construction from a declarative description."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import presets
from .geometry import Grid, MetricField, metric_preset
from .rhs import ConstantRHS, Factor, Growth, ManufacturedRHS, RHSSpec, SeparableRHS
from .symfun import ConeSpec


@dataclass(eq=False)
class ProblemSpec:
    """A Dirichlet problem sigma_k(lambda(eta[u])) = f on a box.

    ``phi`` and ``usub`` are full-grid arrays; only the boundary values of
    ``phi`` enter the equation. ``exact`` is the manufactured solution
    sampled on the grid, when one is known.
    """

    grid: Grid
    cone: ConeSpec
    metric: MetricField
    chi: np.ndarray
    rhs: RHSSpec
    phi: np.ndarray
    usub: np.ndarray
    exact: Optional[np.ndarray] = None
    config: Optional[dict] = None

    def __post_init__(self):
        if self.cone.n != self.grid.n:
            raise ValueError("cone dimension does not match the grid")
        self.chi = np.broadcast_to(np.asarray(self.chi, dtype=float),
                                   (self.grid.size, self.grid.n, self.grid.n)).copy()
        self.phi = np.asarray(self.phi, dtype=float).ravel()
        self.usub = np.asarray(self.usub, dtype=float).ravel()
        b = self.grid.boundary
        if np.max(np.abs(self.usub[b] - self.phi[b])) > 1e-12:
            raise ValueError("subsolution does not match the boundary data")

    @property
    def k(self):
        return self.cone.k


def _growth_from_config(spec):
    if not spec:
        return None
    fbar = float(spec.get("fbar", 1.0))
    return Growth(spec["gamma1"], spec["gamma2"], lambda x, z: np.full(len(z), fbar))


def build_problem(spec, m=None):
    """Build a :class:`ProblemSpec` from its declarative dict.

    Parameters
    ----------
    spec : dict
        The ``problem`` section of a run configuration.
    m : sequence of int, optional
        Override the points per axis (used by refinement studies).
    """
    gspec = spec["grid"]
    grid = Grid(gspec["lo"], gspec["hi"], m if m is not None else gspec["m"])
    n = grid.n
    cone = ConeSpec(n, spec["k"])
    mpreset = metric_preset(spec.get("metric", {"type": "flat"}), n)
    metric = MetricField.from_preset(grid, mpreset, spec.get("christoffel", "analytic"))
    chi_fn = presets.chi_preset(spec.get("chi", {"type": "zero"}), n)
    chi = chi_fn(grid.points, metric.g)

    exact_fn = presets.function_preset(spec["exact"], n) if "exact" in spec else None
    phi_spec = spec.get("phi")
    if phi_spec is not None:
        phi_fn = presets.function_preset(phi_spec, n)
    elif exact_fn is not None:
        phi_fn = exact_fn
    else:
        raise ValueError("problem needs phi or exact")

    rspec = spec["rhs"]
    kind = rspec["type"]
    growth = _growth_from_config(rspec.get("growth"))
    if kind == "constant":
        rhs = ConstantRHS(rspec["value"], growth)
    elif kind == "separable":
        rhs = SeparableRHS(Factor.from_config(rspec.get("a")), Factor.from_config(rspec.get("b")),
                           Factor.from_config(rspec.get("c")), growth)
    elif kind == "manufactured":
        if exact_fn is None:
            raise ValueError("manufactured rhs needs an exact solution")
        rhs = ManufacturedRHS(exact_fn, mpreset, chi_fn, cone.k, Factor.from_config(rspec.get("b")),
                              Factor.from_config(rspec.get("c")), growth)
    else:
        raise ValueError(f"unknown rhs type {kind!r}")

    x = grid.points
    phi = phi_fn.value(x)
    uspec = spec.get("usub", {})
    base = presets.function_preset(uspec["function"], n).value(x) if "function" in uspec else phi
    usub = base - float(uspec.get("bubble", 0.0)) * presets.bubble(grid)
    exact = exact_fn.value(x) if exact_fn is not None else None
    return ProblemSpec(grid, cone, metric, chi, rhs, phi, usub, exact, config=spec)
