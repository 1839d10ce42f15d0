"""Box kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imported cleanly; set
``THERMEVAL_NO_EXT=1`` to force the fallback. ``benchmarks/kernel_bench.py``
compares the two.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import fallback


def _load_compiled() -> ModuleType | None:
    try:
        from . import _box_ops
    except ImportError:
        return None
    return _box_ops


_compiled = _load_compiled()

if _compiled is not None and os.environ.get("THERMEVAL_NO_EXT", "") in ("", "0"):
    _impl = _compiled
    BACKEND = "compiled"
else:
    _impl = fallback
    BACKEND = "python"

iou_matrix = _impl.iou_matrix
suppress_sorted = _impl.suppress_sorted
match_sorted = _impl.match_sorted


def available_backends() -> dict[str, ModuleType]:
    """Both backends when compiled is present, for equivalence tests/benchmarks."""
    out = {"python": fallback}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
