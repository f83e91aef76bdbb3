"""Select the GF(2^8) row-kernel backend.

The compiled extension is used when it imports; otherwise the numpy version.
Set ``CBNC_KERNEL=python`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _gf256_py as python_backend

compiled_backend = None
if os.environ.get("CBNC_KERNEL", "").lower() != "python":
    try:
        from . import _gf256 as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend

BACKEND = backend.BACKEND
axpy = backend.axpy
scale = backend.scale
lincomb = backend.lincomb
matmul = backend.matmul
reduce_row = backend.reduce_row
clear_column = backend.clear_column
