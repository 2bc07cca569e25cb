"""Pure-numpy implementations of the two hot kernels.

Mirrors gazepool._ckernels; gazepool.kernels picks whichever backend is
available at import time. Both kernels accumulate in float64 regardless
of input dtype.
"""

import numpy as np

BACKEND = "python"


def accumulate_density(u, v, height, width, sigma, radius, use_max):
    """Accumulate truncated Gaussian stamps for fixations at grid coords (u, v).

    Cell (r, c) is evaluated at its center (c + 0.5, r + 0.5); cells whose
    center lies farther than `radius` from the fixation stay exactly zero.
    Stamps are combined coordinate-wise by summation, or by maximum when
    `use_max` is set. Returns an unnormalized float64 (height, width) grid.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros((height, width), dtype=np.float64)
    inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma)
    radius2 = radius * radius

    for uu, vv in zip(u, v):
        r0 = max(0, int(np.ceil(vv - 0.5 - radius)))
        r1 = min(height - 1, int(np.floor(vv - 0.5 + radius)))
        c0 = max(0, int(np.ceil(uu - 0.5 - radius)))
        c1 = min(width - 1, int(np.floor(uu - 0.5 + radius)))
        if r0 > r1 or c0 > c1:
            continue
        rows = np.arange(r0, r1 + 1, dtype=np.float64) + 0.5 - vv
        cols = np.arange(c0, c1 + 1, dtype=np.float64) + 0.5 - uu
        dist2 = rows[:, None] ** 2 + cols[None, :] ** 2
        stamp = np.where(dist2 <= radius2, np.exp(-dist2 * inv_two_sigma2), 0.0)
        window = out[r0 : r1 + 1, c0 : c1 + 1]
        if use_max:
            np.maximum(window, stamp, out=window)
        else:
            window += stamp
    return out


def weighted_pool(features, density):
    """Per-channel spatial mean of features weighted cell-wise by density.

    features: (C, H, W) array; density: (H, W) array broadcast across
    channels. Returns a float64 length-C vector.
    """
    feat = np.asarray(features, dtype=np.float64)
    dens = np.asarray(density, dtype=np.float64)
    cells = feat.shape[1] * feat.shape[2]
    return np.einsum("khw,hw->k", feat, dens) / cells
