"""Hot-kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
pure-Python implementations are used. Set ``BRANCHSCHED_PURE=1`` to force the
fallback (useful for benchmarking and debugging). Both backends are
arithmetic-identical, so results never depend on which one is active.
"""

import os

from . import _fallback

if os.environ.get("BRANCHSCHED_PURE"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND
scan_budget_argmax = _impl.scan_budget_argmax
iou_matrix = _impl.iou_matrix
nms_keep = _impl.nms_keep
