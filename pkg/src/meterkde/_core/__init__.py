"""Backend selection for the numerical core.

The compiled extension is preferred when it was built; otherwise the
pure-numpy twin is used. Set METERKDE_BACKEND=numpy|compiled to force a
choice at import time, or call :func:`set_backend` at runtime (used by the
tests and the benchmark).
"""

import os

from . import numpy_backend

try:
    from . import fastcore
except ImportError:
    fastcore = None

_BACKENDS = {"numpy": numpy_backend}
if fastcore is not None:
    _BACKENDS["compiled"] = fastcore

_forced = os.environ.get("METERKDE_BACKEND")
if _forced:
    if _forced not in _BACKENDS:
        raise ImportError(
            f"METERKDE_BACKEND={_forced!r} requested but only "
            f"{sorted(_BACKENDS)} are available"
        )
    _active = _BACKENDS[_forced]
else:
    _active = fastcore if fastcore is not None else numpy_backend


def available_backends():
    return tuple(sorted(_BACKENDS))


def backend_name():
    return _active.NAME


def set_backend(name):
    """Switch the active backend; returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {sorted(_BACKENDS)}")
    previous = _active.NAME
    _active = _BACKENDS[name]
    return previous


def kde_on_grid(values, weights, grid, h_grid):
    return _active.kde_on_grid(values, weights, grid, h_grid)


def crps_grid(xs, cdf, obs):
    return _active.crps_grid(xs, cdf, obs)


def hwt_filter(y, d_idx, w_idx, alpha, delta, omega, phi,
               level, last_error, intraday, intraweek, err_out):
    return _active.hwt_filter(y, d_idx, w_idx, alpha, delta, omega, phi,
                              level, last_error, intraday, intraweek, err_out)
