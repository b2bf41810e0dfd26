"""Kernel backend selection: compiled extension when available, NumPy otherwise.

Set ``HYBRIDCLUST_PURE=1`` to force the NumPy fallback (used by the
benchmark script to compare both backends).
"""

import os

if os.environ.get("HYBRIDCLUST_PURE"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

component_logpdfs = _impl.component_logpdfs
mixture_logpdf = _impl.mixture_logpdf
