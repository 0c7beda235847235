"""Backend selection for the hot kernels.

The compiled extension is preferred; the pure-Python module is the
fallback when it is not built or when ``RDPIPE_PURE_PYTHON`` is set to a
truthy value before import.
"""

import os

from . import _kernels_py

if os.environ.get("RDPIPE_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

levenshtein = _impl.levenshtein
find_balanced_end = _impl.find_balanced_end

__all__ = ["BACKEND", "levenshtein", "find_balanced_end"]
