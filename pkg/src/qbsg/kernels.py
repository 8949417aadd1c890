"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
reference implementation takes over.  Set ``QBSG_KERNELS=python`` to force
the fallback.  Both backends are bit-identical by construction.
"""
from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if os.environ.get("QBSG_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _impl is compiled_backend else "python"

OUTPUT_BITS = _pykernels.OUTPUT_BITS

sample_rounds = _impl.sample_rounds
dag_backward = _impl.dag_backward
dag_reach = _impl.dag_reach
dag_distributions = _impl.dag_distributions
local_search_best = _impl.local_search_best
entropy_bits = _impl.entropy_bits
