import numpy as np
import pytest

from khessian.problem import build_problem

DIAG_METRIC = {"type": "diag_poly",
               "diag": [{"coeffs": [1.0]}, {"axis": 0, "coeffs": [1.0, 0.0, 0.25]}, {"coeffs": [1.0]}]}


def ma_spec(m=17, exact=None, rhs=None, usub=None):
    return {
        "grid": {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "m": [m, m]},
        "k": 2,
        "exact": exact or {"type": "quadratic", "scale": 1.0},
        "rhs": rhs or {"type": "constant", "value": 1.0},
        "usub": usub if usub is not None else {"bubble": 0.1},
    }


def general_spec(k=2, metric="flat", alpha=0.0, m=9, rhs=None):
    return {
        "grid": {"lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0], "m": [m, m, m]},
        "k": k,
        "metric": DIAG_METRIC if metric == "diag" else {"type": "flat"},
        "chi": {"type": "scalar", "alpha": alpha},
        "exact": {"type": "exp_radial"},
        "rhs": rhs or {"type": "manufactured", "b": [{"exp": 0.5}]},
        "usub": {"bubble": 0.1},
    }


@pytest.fixture
def ma_problem():
    return build_problem(ma_spec())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def record_criterion(number, title, ok, detail):
    """Print and remember one acceptance line; the caller asserts ``ok``."""
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
