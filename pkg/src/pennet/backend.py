"""Kernel backend selection.

The hot array kernels (patch gather/scatter behind every convolution and
attention op) exist twice: a numba @njit version and a pure-numpy version.
``PENNET_BACKEND=numpy`` forces the fallback; ``PENNET_BACKEND=numba``
requires numba and fails loudly if it is missing. Default is numba when
importable, numpy otherwise.
"""

from __future__ import annotations

import os

_VALID = ("numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _initial_backend() -> str:
    env = os.environ.get("PENNET_BACKEND", "").strip().lower()
    if env:
        if env not in _VALID:
            raise ValueError(f"PENNET_BACKEND must be one of {_VALID}, got {env!r}")
        if env == "numba" and not _numba_available():
            raise ImportError("PENNET_BACKEND=numba but numba is not importable")
        return env
    return "numba" if _numba_available() else "numpy"


_backend = _initial_backend()


def active_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch kernel backend at runtime (used by tests and benchmarks)."""
    global _backend
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise ImportError("numba backend requested but numba is not importable")
    _backend = name
