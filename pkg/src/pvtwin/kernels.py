"""Backend selection for the numerical kernels.

The compiled extension is used when importable; set the environment
variable ``PVTWIN_PURE_PYTHON=1`` to force the NumPy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("PVTWIN_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

lambertw_exp = _impl.lambertw_exp
i_from_v = _impl.i_from_v
v_oc = _impl.v_oc
mpp = _impl.mpp
rolling_median = _impl.rolling_median


def backend(name):
    """Return the kernel module for ``'python'`` or ``'cython'`` (for tests and benchmarks)."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
