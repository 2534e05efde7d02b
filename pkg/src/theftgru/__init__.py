"""GRU-based electricity-theft detection for smart-meter data.

Pipeline: consumption matrices (:mod:`.data`) -> attacked, labeled days
(:mod:`.attacks`) -> ADASYN, 3:2 split and scaling (:mod:`.preprocessing`)
-> stacked-GRU detector (:mod:`.nn`, :mod:`.optim`, :mod:`.training`) ->
random hyper-parameter search (:mod:`.search`).
"""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
