"""Optional numba acceleration.

Kernels in :mod:`esfem.kernels` exist in two flavours: a loop-based one compiled
with numba's ``njit`` and a vectorised pure-numpy one. The numba path is used
when numba imports cleanly and ``ESFEM_DISABLE_NUMBA`` is unset (or ``0``).
"""
from __future__ import annotations

import os
import warnings

ENV_FLAG = "ESFEM_DISABLE_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def _env_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def get_backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name: str) -> str:
    """Switch the kernel backend at runtime; returns the previous one."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        warnings.warn("numba is not importable, staying on the numpy backend")
        return _backend
    previous, _backend = _backend, name
    return previous
