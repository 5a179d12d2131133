"""Kernel backend selection.

The compiled extension is preferred when importable; set
``NEUROGRAPH_PURE_PYTHON=1`` to force the numpy fallback (useful for
debugging and for the backend benchmark).
"""

import os

from . import pykernels

if os.environ.get("NEUROGRAPH_PURE_PYTHON") == "1":
    simulate_chain = pykernels.simulate_chain
    BACKEND = "python"
else:
    try:
        from ._simcore import simulate_chain

        BACKEND = "cython"
    except ImportError:
        simulate_chain = pykernels.simulate_chain
        BACKEND = "python"

__all__ = ["simulate_chain", "BACKEND", "pykernels"]
