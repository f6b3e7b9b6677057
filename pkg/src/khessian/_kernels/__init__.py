"""Backend dispatch for the numeric kernels.

The numba backend is used when numba imports cleanly, unless the
environment variable ``HESS_NO_NUMBA`` is set to a true value, in which
case the pure numpy implementations are used. ``HESS_THREADS`` caps the
number of numba worker threads.
"""
import os

import numpy as np

from . import _numpy

_TRUE = {"1", "true", "yes", "on"}


def _want_numba():
    return os.environ.get("HESS_NO_NUMBA", "").strip().lower() not in _TRUE


# a module-level name equal to the submodule would shadow it on import
_jit = None
if _want_numba():
    try:
        from . import _numba as _jit
    except ImportError:  # pragma: no cover - numba is a hard dependency
        _jit = None

BACKEND = "numba" if _jit is not None else "numpy"


def set_threads(count=None):
    """Cap numba worker threads (reads ``HESS_THREADS`` when count is None)."""
    if count is None:
        raw = os.environ.get("HESS_THREADS")
        if not raw:
            return
        count = int(raw)
    if _jit is None:
        return
    import numba

    numba.set_num_threads(max(1, min(int(count), numba.config.NUMBA_NUM_THREADS)))


set_threads()


def get_backend(name=None):
    """Return the kernel module for ``name`` ("numba" or "numpy")."""
    name = name or BACKEND
    if name == "numba":
        if _jit is None:
            raise RuntimeError("numba backend unavailable")
        return _jit
    if name == "numpy":
        return _numpy
    raise ValueError(f"unknown backend {name!r}")


def _as2d(a):
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64))


def elem_sym(lam, k):
    return get_backend().elem_sym(_as2d(lam), int(k))


def elem_sym_deleted(lam, k):
    return get_backend().elem_sym_deleted(_as2d(lam), int(k))


def pencil_eig(h, g):
    return get_backend().pencil_eig(_as2d(h), _as2d(g))


def spectral_grad(W, d):
    return get_backend().spectral_grad(_as2d(W), _as2d(d))
