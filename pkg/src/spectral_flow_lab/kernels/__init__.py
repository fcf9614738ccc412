"""Hot inner loops, compiled when available.

The Cython extension ``_ckernels`` is used if it was built; otherwise the
NumPy versions in ``_fallback`` are used. Setting the environment variable
``SPECTRAL_FLOW_LAB_PURE=1`` forces the fallback.
"""
import os

from . import _fallback

BACKEND = "python"

if os.environ.get("SPECTRAL_FLOW_LAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

ordered_product = _impl.ordered_product
track_phases = _impl.track_phases

__all__ = ["BACKEND", "ordered_product", "track_phases"]
