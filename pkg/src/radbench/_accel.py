"""Backend selection for the numeric kernels.

Set ``RADBENCH_DISABLE_NUMBA=1`` to force the pure-numpy path. Numba is also
skipped silently when it is not importable.
"""

from __future__ import annotations

import os

_disabled = os.environ.get("RADBENCH_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _disabled:
        raise ImportError("disabled by RADBENCH_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


BACKEND = "numba" if HAS_NUMBA else "numpy"
