"""Projection-kernel backend selection.

The compiled extension is preferred when it imported cleanly; the NumPy
fallback is otherwise used transparently. Set SMECPLAN_PURE=1 to force the
fallback (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

if os.environ.get("SMECPLAN_PURE", "") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
proj_rows_simplex_box = _impl.proj_rows_simplex_box
proj_halfspace = _impl.proj_halfspace
dykstra_project = _impl.dykstra_project
