"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Both produce identical bits for identical arguments.
"""

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = _compiled if _compiled is not None else _fallback


def available() -> list[str]:
    return sorted(_BACKENDS)


def current() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def set_backend(name: str) -> None:
    """Switch kernels process-wide; ``name`` is ``"compiled"`` or ``"python"``."""
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available()}") from None


def kernels():
    return _active
