"""Kernel backend selection.

Prefers the compiled Cython extension; falls back to the NumPy
implementations when the extension is absent or when the environment
variable ZEROREG_PURE_PYTHON is set to a non-empty value.
"""

import os

from . import _fallback

if os.environ.get("ZEROREG_PURE_PYTHON"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND
count_inliers_batch = _impl.count_inliers_batch
sinkhorn_log = _impl.sinkhorn_log
zbuffer_min = _impl.zbuffer_min

__all__ = ["BACKEND", "count_inliers_batch", "sinkhorn_log", "zbuffer_min"]
