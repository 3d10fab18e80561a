"""Compositing kernel backends.

The compiled Cython kernel is preferred when built; the numpy fallback is
mathematically identical (each backend is individually deterministic).  Set
TRISPLAT_BACKEND=python or =cython to force one.
"""

import os
import warnings

from . import compositing_py

_IMPLS = {"python": compositing_py}

try:
    from . import _compositing_cy

    _IMPLS["cython"] = _compositing_cy
except ImportError:
    _compositing_cy = None

_forced = os.environ.get("TRISPLAT_BACKEND", "").strip().lower()
if _forced and _forced not in ("python", "cython"):
    warnings.warn(f"ignoring unknown TRISPLAT_BACKEND={_forced!r}")
    _forced = ""
if _forced == "cython" and "cython" not in _IMPLS:
    raise ImportError("TRISPLAT_BACKEND=cython but the compiled kernel is not built")

_default = _forced or ("cython" if "cython" in _IMPLS else "python")


def active_backend() -> str:
    """Name of the backend used when none is requested explicitly."""
    return _default


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPLS))


def get_impl(name: str | None = None):
    key = name or _default
    if key not in _IMPLS:
        raise ValueError(f"backend {key!r} unavailable; built: {available_backends()}")
    return _IMPLS[key]
