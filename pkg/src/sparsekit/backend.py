"""Kernel backend selection.

The compiled Cython kernels are preferred when the extension built; the
numpy kernels are the fallback. SPARSEKIT_BACKEND=python|cython forces a
choice (cython raises if the extension is unavailable). SPARSEKIT_THREADS
caps evaluation parallelism (0 or unset = auto).
"""

from __future__ import annotations

import os

from . import _kernels_py

_choice = os.environ.get("SPARSEKIT_BACKEND", "auto").strip().lower() or "auto"
if _choice not in ("auto", "python", "cython"):
    raise ImportError(f"SPARSEKIT_BACKEND must be auto, python or cython, got {_choice!r}")

_impl = None
if _choice in ("auto", "cython"):
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise ImportError(
                "SPARSEKIT_BACKEND=cython but the compiled extension is not built")
if _impl is None:
    _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

apply_threshold = _impl.apply_threshold
conv2d_valid = _impl.conv2d_valid
maxpool2d = _impl.maxpool2d


def backend_name() -> str:
    return BACKEND


def thread_count() -> int:
    """Evaluation worker cap from SPARSEKIT_THREADS; 0 or unset means auto."""
    raw = os.environ.get("SPARSEKIT_THREADS", "0").strip()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        return os.cpu_count() or 1
    return n
