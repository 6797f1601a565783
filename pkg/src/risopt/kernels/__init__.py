"""Kernel selection: compiled extension if available, NumPy fallback otherwise.

Set ``RISOPT_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
for debugging).
"""

import os

if os.environ.get("RISOPT_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

COMPILED = _impl.COMPILED
velocity_prox_grad = _impl.velocity_prox_grad

__all__ = ["COMPILED", "velocity_prox_grad"]
