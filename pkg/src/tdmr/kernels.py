"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``TDMR_PURE_PYTHON=1``
to force the NumPy fallback.
"""
import os

if os.environ.get("TDMR_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import conv_bcjr, forward_backward, greedy_tile, sequential_tile

    BACKEND = "python"
else:
    try:
        from ._ckernels import conv_bcjr, forward_backward, greedy_tile, sequential_tile

        BACKEND = "cython"
    except ImportError:
        from ._pykernels import conv_bcjr, forward_backward, greedy_tile, sequential_tile

        BACKEND = "python"

__all__ = ["BACKEND", "conv_bcjr", "forward_backward", "greedy_tile", "sequential_tile"]
