"""Backend selection for the stepping kernel.

Prefers the compiled extension; falls back to the pure-Python mirror when
the extension is unavailable or ``VISCO_PT_KERNELS=python`` is set.
"""

from __future__ import annotations

import os

if os.environ.get("VISCO_PT_KERNELS", "").lower() in ("python", "py"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _step_kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND: str = _impl.BACKEND
mp_minimize = _impl.mp_minimize
mp_objective = _impl.mp_objective
