"""Compute-backend selection.

The hot batch kernels exist twice: a compiled Cython extension
(``uowloc._kernels``) and a vectorized numpy fallback
(``uowloc._kernels_py``).  The compiled one is preferred when importable;
set ``UOWLOC_BACKEND=python`` or ``UOWLOC_BACKEND=compiled`` to force a
choice (forcing an unavailable backend raises).  Both satisfy the same
contract; ``benchmarks/bench_backends.py`` compares their throughput.
"""

from __future__ import annotations

import os

from . import _kernels_py
from .errors import BackendUnavailable

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _compiled is not None else ("python",)


def get_kernels(name: str | None = None):
    """Kernel module for ``name`` ('compiled' | 'python'), or the default."""
    if name is None:
        name = backend_name()
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise BackendUnavailable("compiled kernels are not installed")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def backend_name() -> str:
    forced = os.environ.get("UOWLOC_BACKEND")
    if forced:
        if forced not in ("compiled", "python"):
            raise BackendUnavailable(f"UOWLOC_BACKEND must be 'compiled' or 'python', got {forced!r}")
        if forced == "compiled" and _compiled is None:
            raise BackendUnavailable("UOWLOC_BACKEND=compiled but the extension is not installed")
        return forced
    return "compiled" if _compiled is not None else "python"


def kernels():
    """The active kernel module (re-evaluates the environment override)."""
    return get_kernels(backend_name())
