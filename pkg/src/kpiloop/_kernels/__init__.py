"""Traversal kernel selection: compiled extension with numpy fallback.

Set ``KPILOOP_PURE_PYTHON=1`` to force the fallback (useful for the backend
benchmark and for debugging).
"""

from __future__ import annotations

import os

from . import pytree

if os.environ.get("KPILOOP_PURE_PYTHON"):
    _impl = pytree
else:
    try:
        from . import _ctree as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pytree

BACKEND: str = _impl.BACKEND
tree_path_lengths = _impl.tree_path_lengths
