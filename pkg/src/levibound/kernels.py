"""Kernel backend selection.

The compiled extension is used when it imports; set ``LEVIBOUND_PURE=1`` to
force the numpy fallback.
"""

import os

BACKEND = "python"

if os.environ.get("LEVIBOUND_PURE") != "1":
    try:
        from ._ckernels import block_series, poly_eval

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._pykernels import block_series, poly_eval

__all__ = ["BACKEND", "block_series", "poly_eval"]
