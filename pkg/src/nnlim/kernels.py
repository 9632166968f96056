"""Limiter kernel dispatch: compiled extension if available, NumPy otherwise.

Set ``NNLIM_PURE_PYTHON=1`` to force the NumPy implementation.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("NNLIM_PURE_PYTHON", "0") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

minmod3 = _kernels_py.minmod3
minmod_limit_1d = _impl.minmod_limit_1d
hio_limit_1d = _impl.hio_limit_1d
minmod_limit_2d = _impl.minmod_limit_2d
hio_limit_2d = _impl.hio_limit_2d
