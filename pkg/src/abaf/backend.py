"""Kernel backend selection.

Hot numeric loops exist twice: a numba @njit version and a pure-numpy
fallback with identical signatures. ABAF_BACKEND picks one:

    ABAF_BACKEND=numba   force numba (ImportError if unavailable)
    ABAF_BACKEND=numpy   force the numpy fallbacks
    unset / auto         numba when importable, numpy otherwise

The choice is frozen at import time so a run never mixes backends.
"""

import os

# The bundled TBB here is too old for numba's TBB layer and triggers a
# warning on import; OpenMP is present and race-free for our prange use.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_FLAG = os.environ.get("ABAF_BACKEND", "auto").strip().lower()

if _FLAG not in ("auto", "numba", "numpy"):
    raise ValueError(f"ABAF_BACKEND must be auto, numba or numpy, got {_FLAG!r}")
if _FLAG == "numba" and not HAS_NUMBA:
    raise ImportError("ABAF_BACKEND=numba but numba is not importable")

USE_NUMBA = _FLAG == "numba" or (_FLAG == "auto" and HAS_NUMBA)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def select(numpy_impl, numba_impl):
    """Return the active implementation of a kernel pair."""
    return numba_impl if USE_NUMBA else numpy_impl
