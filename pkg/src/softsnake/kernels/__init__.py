"""Kernel backend selection.

Hot numeric kernels exist twice: numba @njit (``numba_backend``) and
pure numpy (``numpy_backend``). The active default is chosen once at
import from the SOFTSNAKE_BACKEND environment variable ("numba" or
"numpy"); unset means numba when it imports, numpy otherwise. Code
that wants a specific backend regardless of the env flag calls
``get_backend(name)``.
"""
from __future__ import annotations

import os

from . import numpy_backend

try:
    from . import numba_backend
    HAS_NUMBA = True
except ImportError:
    numba_backend = None
    HAS_NUMBA = False


def get_backend(name: str):
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return numba_backend
    raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")


def default_backend():
    choice = os.environ.get("SOFTSNAKE_BACKEND", "").strip().lower()
    if choice:
        return get_backend(choice)
    return numba_backend if HAS_NUMBA else numpy_backend


active = default_backend()
