"""Clustering kernels: compiled extension with pure-Python fallback.

The compiled backend (`_ckernels`, Cython) is preferred when importable;
otherwise the pure-Python `_pykernels` module is used. Both implement the
same contract and produce identical merge sequences, so the choice only
affects speed. Set LACCLEAN_KERNEL=python (or =c) to force a backend, e.g.
to benchmark the fallback; `c` raises if the extension is missing.
"""

import os

from . import _pykernels

_forced = os.environ.get("LACCLEAN_KERNEL")
if _forced not in (None, "c", "python"):
    raise ImportError(f"LACCLEAN_KERNEL must be 'c' or 'python', got {_forced!r}")

if _forced == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "c"
    except ImportError:
        if _forced == "c":
            raise
        _impl = _pykernels
        BACKEND = "python"

LINKAGE_SINGLE = _pykernels.LINKAGE_SINGLE
LINKAGE_COMPLETE = _pykernels.LINKAGE_COMPLETE
LINKAGE_AVERAGE = _pykernels.LINKAGE_AVERAGE
LINKAGE_CENTROID = _pykernels.LINKAGE_CENTROID

pairwise_distances = _impl.pairwise_distances
agglomerate_merges = _impl.agglomerate_merges
