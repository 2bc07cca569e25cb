"""Backend dispatch for the hot numerical kernels.

The compiled extension (gazepool._ckernels) is used when it was built;
otherwise the numpy implementation takes over. Setting GAZEPOOL_PURE=1
forces the numpy backend, which is handy for debugging and benchmarks.

Both backends implement:

    accumulate_density(u, v, height, width, sigma, radius, use_max)
        -> float64 (height, width) grid of truncated Gaussian stamps

    weighted_pool(features: float32 (C, H, W), density: float32 (H, W))
        -> float64 (C,) per-channel weighted spatial mean
"""

import os

from gazepool import _pykernels

if os.environ.get("GAZEPOOL_PURE", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from gazepool import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

accumulate_density = _impl.accumulate_density
weighted_pool = _impl.weighted_pool


def backend_name() -> str:
    """Name of the active kernel backend: "cython" or "python"."""
    return _impl.BACKEND
