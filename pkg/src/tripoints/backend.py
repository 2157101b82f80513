"""Decode kernel backend selection.

The compiled extension is preferred when it was built; the pure-NumPy
fallback is always available.  Set TRIPOINTS_BACKEND=python or =compiled
to force a choice at import time.
"""

from __future__ import annotations

import os

from . import _decode_py

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None

_FORCED = os.environ.get("TRIPOINTS_BACKEND")


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _compiled is not None else ("python",)


def default_backend() -> str:
    if _FORCED:
        if _FORCED not in ("compiled", "python"):
            raise ValueError(f"TRIPOINTS_BACKEND must be 'compiled' or 'python', got {_FORCED!r}")
        if _FORCED == "compiled" and _compiled is None:
            raise RuntimeError("TRIPOINTS_BACKEND=compiled but the extension is not built")
        return _FORCED
    return "compiled" if _compiled is not None else "python"


def get_kernels(name: str | None = None):
    name = name or default_backend()
    if name == "python":
        return _decode_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled backend requested but the extension is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
