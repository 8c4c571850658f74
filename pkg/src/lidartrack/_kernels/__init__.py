"""Kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the
pure python module is the fallback and the reference for its semantics.
Set LIDARTRACK_FORCE_FALLBACK=1 to ignore the extension (used by the
benchmark and by tests that exercise the fallback path).
"""

import os

from . import _fallback

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on the build environment
    _core = None

if os.environ.get("LIDARTRACK_FORCE_FALLBACK") == "1":
    _core = None

HAVE_COMPILED = _core is not None

_BACKENDS = {"python": _fallback}
if _core is not None:
    _BACKENDS["compiled"] = _core

DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"


def backend_module(name=None):
    """Return the kernel module for `name` (default: best available)."""
    if name is None:
        name = DEFAULT_BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None


def available_backends():
    return sorted(_BACKENDS)
