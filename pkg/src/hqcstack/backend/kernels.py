"""Kernel selection: compiled extension when present, NumPy fallback otherwise.

Set HQCSTACK_KERNELS=numpy (or =cython) to force a specific implementation;
forcing cython raises if the extension was not built.
"""

from __future__ import annotations

import os

_forced = os.environ.get("HQCSTACK_KERNELS", "").strip().lower()

if _forced in ("numpy", "py", "python"):
    from . import _kernels_py as _impl
elif _forced in ("cython", "cy", "ext"):
    from . import _statevector as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _statevector as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as _impl

IMPLEMENTATION: str = _impl.IMPLEMENTATION
apply_1q = _impl.apply_1q
apply_cz = _impl.apply_cz
apply_cx = _impl.apply_cx
apply_swap = _impl.apply_swap
