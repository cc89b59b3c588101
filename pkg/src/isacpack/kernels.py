"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the NumPy versions
are. Setting ``ISACPACK_PURE_PYTHON=1`` forces the NumPy path.
"""

import os

from . import _pykernels
from ._pykernels import ordered_pairs

BACKEND = "python"
lagrangian_value_grad = _pykernels.lagrangian_value_grad
pair_sq_distances = _pykernels.pair_sq_distances

if os.environ.get("ISACPACK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        _kernels = None
    if _kernels is not None:
        BACKEND = "cython"
        lagrangian_value_grad = _kernels.lagrangian_value_grad
        pair_sq_distances = _kernels.pair_sq_distances

__all__ = ["BACKEND", "lagrangian_value_grad", "pair_sq_distances", "ordered_pairs"]
