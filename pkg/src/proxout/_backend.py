"""Backend selection for the hot numeric kernels.

The package ships two implementations of every hot kernel: a numba
``@njit`` version and a pure-numpy one.  ``PROXOUT_BACKEND`` picks the
active one:

* ``auto`` (default): numba when importable, numpy otherwise
* ``numba``: force numba (raises if numba is missing)
* ``numpy``: force the pure-numpy fallback

Both implementations stay importable regardless of the flag so tests and
benchmarks can compare them directly.
"""

from __future__ import annotations

import os

_VALID = ("auto", "numba", "numpy")

BACKEND_ENV_VAR = "PROXOUT_BACKEND"

_requested = os.environ.get(BACKEND_ENV_VAR, "auto").lower()
if _requested not in _VALID:
    raise RuntimeError(
        f"{BACKEND_ENV_VAR} must be one of {_VALID}, got {_requested!r}"
    )

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    numba = None
    HAVE_NUMBA = False

if _requested == "numba" and not HAVE_NUMBA:
    raise RuntimeError("PROXOUT_BACKEND=numba but numba is not importable")

USE_NUMBA: bool = HAVE_NUMBA if _requested == "auto" else _requested == "numba"


def active_backend() -> str:
    """Name of the backend the hot kernels are currently wired to."""
    return "numba" if USE_NUMBA else "numpy"


def jit(func):
    """Compile ``func`` with numba when available; identity otherwise.

    Compilation is cached on disk so repeated processes skip the JIT cost.
    ``fastmath`` stays off: kernel arithmetic must be IEEE-ordered so that
    results are reproducible and comparable against the numpy fallback.
    """
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
