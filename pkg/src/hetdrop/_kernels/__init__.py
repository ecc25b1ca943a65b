"""Hot numerical kernels with backend selection at import time.

The compiled Cython extension is used when present; set HETDROP_PURE=1 to
force the numpy fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import numpy_backend

if os.environ.get("HETDROP_PURE", "") not in ("", "0"):
    _impl = numpy_backend
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = numpy_backend

BACKEND = _impl.NAME

csr_dense_matmul = _impl.csr_dense_matmul
edge_propagate = _impl.edge_propagate
edge_pair_dot = _impl.edge_pair_dot
jacobi_eigenvalues = _impl.jacobi_eigenvalues

__all__ = [
    "BACKEND",
    "csr_dense_matmul",
    "edge_propagate",
    "edge_pair_dot",
    "jacobi_eigenvalues",
    "numpy_backend",
]
