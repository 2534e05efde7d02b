"""GRU recurrence kernels with a compiled backend and a numpy fallback.

The compiled extension ``_gru`` is used when it imports; otherwise, or when
``THEFTGRU_PURE_PYTHON=1`` is set, the numpy versions in ``_reference`` are.
``BACKEND`` names the active one.
"""

import os

from . import _reference as reference
from ._reference import HARD_SIGMOID, RELU, SIGMOID, TANH

compiled = None
if os.environ.get("THEFTGRU_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _gru as compiled
    except ImportError:
        compiled = None

if compiled is not None:
    gru_forward, gru_backward = compiled.gru_forward, compiled.gru_backward
    BACKEND = "cython"
else:
    gru_forward, gru_backward = reference.gru_forward, reference.gru_backward
    BACKEND = "python"

__all__ = ["gru_forward", "gru_backward", "BACKEND", "reference", "compiled",
           "SIGMOID", "RELU", "HARD_SIGMOID", "TANH"]
