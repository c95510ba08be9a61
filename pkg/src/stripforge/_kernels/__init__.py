"""Hot-loop kernels: compiled extension when available, numpy otherwise.

Set ``STRIPFORGE_PURE=1`` to force the numpy backend (used by the test suite
to exercise both implementations and by the benchmark for comparison).
"""

import os

from . import numpy_impl

if os.environ.get("STRIPFORGE_PURE") == "1":
    _impl = numpy_impl
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = numpy_impl

BACKEND = _impl.BACKEND
gauss_linking_sum = _impl.gauss_linking_sum
polyline_crossings = _impl.polyline_crossings
min_distance_excluding = _impl.min_distance_excluding
min_distance_between = _impl.min_distance_between

__all__ = [
    "BACKEND",
    "gauss_linking_sum",
    "polyline_crossings",
    "min_distance_excluding",
    "min_distance_between",
    "numpy_impl",
]
