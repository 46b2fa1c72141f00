"""Backend selection for the hot loops.

The compiled extension is used when it was built and imports cleanly. Set
``DUALVAD_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import logging
import os

from dualvad import _pykernels

logger = logging.getLogger(__name__)

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DUALVAD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from dualvad import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        logger.debug("compiled kernels unavailable, using pure-Python fallback")

apportion = _impl.apportion
midrank_auc = _impl.midrank_auc
count_in_intervals = _impl.count_in_intervals

__all__ = ["BACKEND", "apportion", "midrank_auc", "count_in_intervals"]
