"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
fallback is imported.  Setting ``DETSHOCK_PURE_PYTHON=1`` forces the
fallback, which is how the tests cross-check the two paths.
"""

import os

from . import _kernels_py

if os.environ.get("DETSHOCK_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

rho_hat_array = _impl.rho_hat_array
assemble_interior = _impl.assemble_interior
holder_all_pairs = _impl.holder_all_pairs
holder_index_pairs = _impl.holder_index_pairs


def compiled_available() -> bool:
    """True if the compiled extension can be imported at all."""
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
