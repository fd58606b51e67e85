"""Select the numeric kernel implementation at import time.

The compiled extension is preferred; the pure-Python twin is used when the
extension is absent or the ``TABUKIT_PURE`` environment variable is set to
a non-empty value.  ``COMPILED`` reports which one is active.  Both
submodules are importable directly (the benchmark does so to compare them).
"""

from __future__ import annotations

import os

if os.environ.get("TABUKIT_PURE"):
    from . import _purekernels as impl
else:
    try:
        from . import _speedups as impl  # type: ignore[no-redef]
    except ImportError:
        from . import _purekernels as impl  # type: ignore[no-redef]

COMPILED: bool = bool(impl.COMPILED)
trace_coupler = impl.trace_coupler
path_sse = impl.path_sse
hydraulic_trajectory = impl.hydraulic_trajectory
