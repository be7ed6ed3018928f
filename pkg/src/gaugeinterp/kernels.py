"""Backend selection for the batched SU(2) kernels.

The compiled extension is used when it imports; set ``GAUGEINTERP_PURE=1`` to
force the numpy fallback.  Both expose ``qmul``, ``qconj``, ``qpow``,
``slerp_mid``, ``qflux`` and ``eigenframe`` with identical semantics.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("GAUGEINTERP_PURE", "") in ("", "0"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

qmul = _impl.qmul
qconj = _impl.qconj
qpow = _impl.qpow
slerp_mid = _impl.slerp_mid
qflux = _impl.qflux
eigenframe = _impl.eigenframe
DEGENERATE_TOL = _kernels_py.DEGENERATE_TOL

__all__ = ["BACKEND", "qmul", "qconj", "qpow", "slerp_mid", "qflux", "eigenframe",
           "DEGENERATE_TOL"]
