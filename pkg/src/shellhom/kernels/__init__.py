"""Hot numerical kernels with an optional compiled backend.

The Cython extension is used when it was built and imported cleanly;
otherwise the numpy reference implementation is selected. Setting the
environment variable ``SHELLHOM_PURE=1`` forces the numpy path.
"""
from __future__ import annotations

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("SHELLHOM_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

svk_energy = _impl.svk_energy
quad_form = _impl.quad_form
schur = _impl.schur

__all__ = ["BACKEND", "svk_energy", "quad_form", "schur",
           "python_backend", "compiled_backend"]
