"""Kernel backend selection.

Uses the compiled ``_ckernels`` extension when it is importable and the
pure NumPy ``_pykernels`` otherwise. Set ``OKL_PURE_PYTHON=1`` to force
the fallback.
"""

import os

from . import _pykernels

if os.environ.get("OKL_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
gillespie_block = _impl.gillespie_block
hn_log_weights = _impl.hn_log_weights
riemann_exp_integral = _impl.riemann_exp_integral

python_kernels = _pykernels


def compiled_kernels():
    """The compiled module, or ``None`` if it was not built."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels
