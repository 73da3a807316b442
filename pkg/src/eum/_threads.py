"""BLAS thread caps driven by the EUM_THREADS environment variable.

Applied before numpy's first import (see the package __init__). Unset, "0",
or "1" selects fully deterministic single-threaded math — matrix reductions
then always accumulate in the same order. Larger values allow that many
BLAS threads.
"""

from __future__ import annotations

import os

_BLAS_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def requested_threads() -> int:
    """Thread count implied by EUM_THREADS (>= 1)."""
    raw = os.environ.get("EUM_THREADS", "1").strip()
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def apply_thread_cap() -> int:
    """Export the cap to every BLAS backend; returns the cap."""
    n = requested_threads()
    for var in _BLAS_VARS:
        os.environ.setdefault(var, str(n))
    return n


apply_thread_cap()
