"""Backend selection for the hot kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is loaded. Set ``LATTICENOISE_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _pykernels

pure = _pykernels

if os.environ.get("LATTICENOISE_PURE_PYTHON", "").strip() not in ("", "0"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "python"

stack_pauli = _impl.stack_pauli
average_conjugation = _impl.average_conjugation
monte_carlo_outputs = _impl.monte_carlo_outputs
unit_norm_jacobian = _impl.unit_norm_jacobian
