"""Kernel backend selection.

Every hot loop has two implementations with identical signatures and
semantics: numba @njit kernels in _kernels_numba and vectorized numpy
fallbacks in _kernels_numpy.  TOMO_BACKEND picks one:

    TOMO_BACKEND=numba   require numba (ImportError if missing)
    TOMO_BACKEND=numpy   force the fallback
    unset / auto         numba if importable, else numpy

TOMO_THREADS caps numba's thread count.  Kernels parallelize only over
output elements (each output owned by one thread, inner accumulation
sequential), so results are bit-identical for any thread count.
"""

import os

from .errors import ValidationError

_choice = os.environ.get("TOMO_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValidationError(
        f"TOMO_BACKEND must be one of auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    from . import _kernels_numpy as kernels
    BACKEND = "numpy"
else:
    try:
        import numba

        _threads = os.environ.get("TOMO_THREADS")
        if _threads:
            try:
                _cap = int(_threads)
            except ValueError:
                raise ValidationError(
                    f"TOMO_THREADS must be an integer, got {_threads!r}")
            # a cap, not a demand: clamp to what the machine offers
            numba.set_num_threads(
                min(max(1, _cap), numba.config.NUMBA_NUM_THREADS))
        from . import _kernels_numba as kernels
        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import _kernels_numpy as kernels
        BACKEND = "numpy"

__all__ = ["kernels", "BACKEND"]
