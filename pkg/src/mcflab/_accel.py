"""Numba switch.

Hot kernels are written once as plain Python/numpy and wrapped with
:func:`maybe_njit`.  Setting ``MCFLAB_DISABLE_NUMBA=1`` (or running without
numba installed) leaves them as ordinary Python functions, which is the
pure-numpy fallback path used for cross-checking and benchmarking.
"""
from __future__ import annotations

import os

_disabled = os.environ.get("MCFLAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def maybe_njit(func=None, **options):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    options.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return _njit(**options)(f)

    if func is None:
        return wrap
    return wrap(func)


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
