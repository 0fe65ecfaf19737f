"""Backend selection for the batched block kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation is used.  Set ``MATNET_KERNELS=numpy`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("MATNET_KERNELS", "").lower() == "numpy":
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
block_forward = _impl.block_forward
block_backward = _impl.block_backward
rotate_forward = _impl.rotate_forward
rotate_backward = _impl.rotate_backward


def get_backend(name):
    """Return the kernel module named ``"cython"`` or ``"numpy"``."""
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
