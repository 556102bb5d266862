"""Hot-loop kernels with backend selection at import time.

The compiled Cython backend is preferred when the extension built; the
numpy fallback is used otherwise.  Set ``ANNUMAX_KERNELS=numpy`` or
``ANNUMAX_KERNELS=compiled`` to force a backend (the latter raises if the
extension is missing).  Both backends produce bit-identical masks; see
``benchmarks/bench_kernels.py`` for a speed comparison.
"""

import os

from . import _numpy

_requested = os.environ.get("ANNUMAX_KERNELS", "").strip().lower()

if _requested == "numpy":
    _impl = _numpy
elif _requested == "compiled":
    from . import _compiled as _impl
elif _requested == "":
    try:
        from . import _compiled as _impl
    except ImportError:
        _impl = _numpy
else:
    raise ImportError(
        f"unknown ANNUMAX_KERNELS value {_requested!r}; use 'numpy' or 'compiled'"
    )

BACKEND = _impl.BACKEND_NAME
annulus_mask = _impl.annulus_mask
cap_mask = _impl.cap_mask
slab_mask = _impl.slab_mask
cap_count = _impl.cap_count

__all__ = ["BACKEND", "annulus_mask", "cap_mask", "slab_mask", "cap_count"]
