"""Kernel lane selection.

Two interchangeable statevector kernel lanes exist:

* ``numba`` -- JIT-compiled loops (default when numba imports cleanly)
* ``numpy`` -- pure-numpy reference lane

The environment variable ``CPQC_BACKEND`` forces a lane (``numpy`` or
``numba``); anything else raises at first use.  ``CPQC_THREADS`` caps the
worker threads used for population-parallel search and, when the numba lane
is active, numba's own thread pool.

Both lanes produce bitwise-identical results for the same inputs is *not*
guaranteed (different summation orders); both satisfy the simulator
contracts to well below 1e-12, and every run sticks to a single lane, so
fixed-seed runs are reproducible byte for byte.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

try:
    from . import _kernels_numba

    HAS_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAS_NUMBA = False

_SELECTED = None
_SELECTED_NAME = ""


def backend_name() -> str:
    get_kernels()
    return _SELECTED_NAME


def get_kernels(name: str | None = None):
    """Return the kernel module for ``name`` (or the resolved default)."""
    global _SELECTED, _SELECTED_NAME
    if name is None:
        if _SELECTED is not None:
            return _SELECTED
        name = os.environ.get("CPQC_BACKEND", "").strip().lower()
        if not name:
            name = "numba" if HAS_NUMBA else "numpy"
        _SELECTED = _resolve(name)
        _SELECTED_NAME = name
        _SELECTED.prewarm()
        if name == "numba":
            _apply_thread_cap()
        return _SELECTED
    return _resolve(name)


def _resolve(name: str):
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("CPQC_BACKEND=numba but numba is not importable")
        return _kernels_numba
    raise ValueError(f"unknown backend {name!r}; expected 'numpy' or 'numba'")


def thread_count() -> int:
    """Worker-thread cap from CPQC_THREADS (default 1: fully serial)."""
    raw = os.environ.get("CPQC_THREADS", "").strip()
    if not raw:
        return 1
    count = int(raw)
    if count < 1:
        raise ValueError("CPQC_THREADS must be a positive integer")
    return count


def _apply_thread_cap() -> None:
    import numba

    try:
        numba.set_num_threads(min(thread_count(), numba.config.NUMBA_NUM_THREADS))
    except ValueError:
        pass
