"""Backend selection for the hot kernels.

Numba is used when importable unless ``JAMGRAPH_DISABLE_NUMBA`` is set to a
truthy value, in which case every kernel runs its pure-numpy twin.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

NUMBA_DISABLED = os.environ.get("JAMGRAPH_DISABLE_NUMBA", "").strip().lower() not in _FALSY
USE_NUMBA = HAS_NUMBA and not NUMBA_DISABLED


def njit(fn):
    """Compile ``fn`` with numba if available, otherwise return it untouched."""
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def resolve_backend(backend="auto"):
    if backend == "auto":
        return "numba" if USE_NUMBA else "numpy"
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend
