"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available. Both produce bit-identical results, so switching backends
never changes any output, only speed. Selection honors the GRAF_BACKEND
environment variable ("auto", "compiled", "python") at import time, and
tests or benchmarks can switch at runtime with use().
"""

from __future__ import annotations

import os

from . import _kernels_py
from .errors import UsageError

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def _default():
    choice = os.environ.get("GRAF_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return _compiled if _compiled is not None else _kernels_py
    if choice in _BACKENDS:
        return _BACKENDS[choice]
    raise UsageError(
        f"GRAF_BACKEND={choice!r}: expected auto, compiled, or python"
        + ("" if _compiled is not None else " (compiled backend not built)")
    )


_active = _default()


def kernels():
    """The active kernel module."""
    return _active


def name() -> str:
    return "compiled" if _active is _compiled else "python"


def available() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def use(which: str) -> str:
    """Switch backends; returns the previous backend name."""
    global _active
    if which not in _BACKENDS:
        raise UsageError(
            f"unknown backend {which!r}; available: {', '.join(available())}"
        )
    prev = name()
    _active = _BACKENDS[which]
    return prev
