"""Optional numba acceleration.

Kernels in :mod:`drcc.kernels` come in pairs: a loop-based version compiled
with ``numba.njit`` and a vectorized numpy version. The numba path is used when
numba imports cleanly and neither ``DRCC_DISABLE_NUMBA`` nor
``NUMBA_DISABLE_JIT`` is set to a truthy value.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _flag("DRCC_DISABLE_NUMBA") and not _flag("NUMBA_DISABLE_JIT")


def njit(fn):
    """Compile ``fn`` with ``numba.njit(cache=True)`` when numba is usable."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


def pick(fast, slow):
    """Return the numba kernel when acceleration is enabled, else the numpy one."""
    return fast if USE_NUMBA else slow
