"""Hot kernels, compiled when possible.

The Cython extension is imported if it was built; otherwise the pure-Python
fallback is used. Set ``COMMONEVAL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("COMMONEVAL_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
familiarity_matrix = _impl.familiarity_matrix
log_column_sums = _impl.log_column_sums


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    return BACKENDS[name or BACKEND]
