"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and imports cleanly;
``CONNCALC_PURE_PYTHON=1`` forces the fallback.  ``BACKEND`` names the choice.
"""
import os

from . import _fallback
from ._fallback import TERM_FIELDS

fallback_loop_matrix_kernel = _fallback.loop_matrix_kernel
compiled_loop_matrix_kernel = None

if os.environ.get("CONNCALC_PURE_PYTHON", "").strip() not in ("", "0"):
    loop_matrix_kernel = fallback_loop_matrix_kernel
    BACKEND = "python"
else:
    try:
        from ._loopkern import loop_matrix_kernel as compiled_loop_matrix_kernel
    except ImportError:  # extension not built
        loop_matrix_kernel = fallback_loop_matrix_kernel
        BACKEND = "python"
    else:
        loop_matrix_kernel = compiled_loop_matrix_kernel
        BACKEND = "cython"

__all__ = ["loop_matrix_kernel", "fallback_loop_matrix_kernel", "compiled_loop_matrix_kernel",
           "BACKEND", "TERM_FIELDS"]
