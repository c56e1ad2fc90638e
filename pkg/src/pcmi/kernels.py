"""Selects the compiled sampling kernels when available.

``KERNEL_BACKEND`` reports which implementation is active. Both expose
``mix_distribution`` and ``nucleus_pick`` with identical semantics; the
benchmark suite compares their throughput.
"""
from __future__ import annotations

from . import _pykernels

try:
    from . import _ckernels as _impl

    KERNEL_BACKEND = "cython"
except ImportError:  # extension not built; pure-Python fallback
    _impl = _pykernels
    KERNEL_BACKEND = "python"

mix_distribution = _impl.mix_distribution
nucleus_pick = _impl.nucleus_pick


def implementations() -> dict:
    """All available kernel implementations, keyed by backend name."""
    impls = {"python": _pykernels}
    if KERNEL_BACKEND == "cython":
        impls["cython"] = _impl
    return impls
