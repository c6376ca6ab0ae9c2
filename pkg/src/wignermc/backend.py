"""Kernel backend selection.

Hot numerical kernels exist twice: a numba build (scalar loops under
``@njit``) and a pure-numpy build (vectorised over trajectories).  Both
consume the same counter-based RNG and produce the same draws, so results
agree between backends to floating-point roundoff.

The active backend is chosen once, at first use, from the environment
variable ``WIGNERMC_BACKEND``:

* unset or ``auto``: numba when importable, numpy otherwise
* ``numba``: require numba, raise if it cannot be imported
* ``numpy``: force the pure-numpy path
"""

from __future__ import annotations

import importlib
import os
from contextlib import contextmanager

from .errors import ConfigError

ENV_VAR = "WIGNERMC_BACKEND"

_ACTIVE = None


def _load(name: str):
    if name == "numba":
        return importlib.import_module("wignermc._kernels_numba")
    if name == "numpy":
        return importlib.import_module("wignermc._kernels_numpy")
    raise ConfigError(
        f"{ENV_VAR} must be 'numba', 'numpy' or 'auto', got {name!r}"
    )


def _choose() -> str:
    env = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if env == "auto":
        try:
            importlib.import_module("numba")
            return "numba"
        except ImportError:
            return "numpy"
    return env


def active():
    """Return the active kernels module, loading it on first call."""
    global _ACTIVE
    if _ACTIVE is None:
        _ACTIVE = _load(_choose())
    return _ACTIVE


def name() -> str:
    return active().BACKEND_NAME


def set_workers(workers: int) -> int:
    """Pin the numba thread count, clamped to what the host allows.

    Results are independent of the worker count by construction (every
    trajectory owns its RNG streams and its output slots), so this only
    affects wall time.  The numpy backend ignores it.  Returns the count
    actually applied.
    """
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    if name() != "numba":
        return 1
    import numba

    applied = min(workers, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(applied)
    return applied


@contextmanager
def use(backend_name: str):
    """Temporarily switch backend (used by tests and the benchmark)."""
    global _ACTIVE
    previous = _ACTIVE
    _ACTIVE = _load(backend_name)
    try:
        yield _ACTIVE
    finally:
        _ACTIVE = previous
