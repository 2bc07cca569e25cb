"""Fixation encoding: screen coordinates to per-image density maps.

Fixations are assigned to collage images by box containment, mapped
into continuous feature-grid coordinates with an affine transform, and
rendered as truncated isotropic Gaussians evaluated at cell centers
(cell (r, c) has its center at (c + 0.5, r + 0.5)). The per-fixation
stamps are combined by summation (average pooling) or coordinate-wise
maximum, then the grid is rescaled to mean 1 so that the all-ones map
is the uniform "global" map.

``sigma_fix`` is measured in feature-grid cells; the affine transform
makes it independent of the on-screen image size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from gazepool import kernels
from gazepool.errors import PipelineError
from gazepool.types import CollageLayout, FixationDensityMap, FixationLog

AVERAGE = "average"
MAX = "max"

SIGMA_SWEEP = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)


@dataclass(frozen=True)
class EncodingConfig:
    """Parameters of the fixation-to-density-map encoding.

    truncation_radius is in grid cells and defaults to 3 * sigma_fix;
    cells farther than it from a fixation stay exactly zero.
    """

    sigma_fix: float = 1.6
    pooling: str = AVERAGE
    truncation_radius: float = None

    def __post_init__(self):
        if not self.sigma_fix > 0:
            raise ValueError(f"sigma_fix must be positive, got {self.sigma_fix}")
        if self.pooling not in (AVERAGE, MAX):
            raise ValueError(f"pooling must be 'average' or 'max', got {self.pooling!r}")
        if self.truncation_radius is None:
            object.__setattr__(self, "truncation_radius", 3.0 * self.sigma_fix)
        if self.truncation_radius < self.sigma_fix:
            raise ValueError(
                f"truncation_radius {self.truncation_radius} < sigma_fix {self.sigma_fix}"
            )


@dataclass(frozen=True)
class GridFixations:
    """Fixations of one image in continuous grid coordinates."""

    u: np.ndarray  # column coordinate in [0, width]
    v: np.ndarray  # row coordinate in [0, height]
    duration_ms: np.ndarray

    def __post_init__(self):
        for name in ("u", "v", "duration_ms"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def count(self) -> int:
        return int(self.u.shape[0])

    @property
    def total_duration_ms(self) -> float:
        return float(self.duration_ms.sum())

    def points(self) -> np.ndarray:
        return np.column_stack((self.u, self.v))


@dataclass(frozen=True)
class FixationAssignment:
    """Per-image grid fixations plus the fixations that hit no image."""

    per_image: dict  # image_id -> GridFixations, fixated images only
    discarded: tuple  # Fixation objects in the gutters

    @property
    def discarded_count(self) -> int:
        return len(self.discarded)


GridDims = Union[tuple, Mapping]


def assign_fixations(
    log: FixationLog, layout: CollageLayout, grid_dims: GridDims = (14, 14)
) -> FixationAssignment:
    """Map screen-space fixations onto the feature grids of fixated images.

    A fixation inside an image box (half-open, so shared edges are
    unambiguous) lands at u = (x - x0) / (x1 - x0) * W and
    v = (y - y0) / (y1 - y0) * H. Fixations landing on no image go to
    the discard list; snapping them to the nearest image would fabricate
    attention. ``grid_dims`` is one (H, W) pair or a mapping
    image_id -> (H, W).
    """
    if log.collage_id != layout.collage_id:
        raise PipelineError(
            f"layout/log mismatch: log is for collage {log.collage_id!r}, "
            f"layout for {layout.collage_id!r}"
        )
    per_image: dict = {}
    discarded = []
    for fix in log.fixations:
        entry = None
        for e in layout.entries:
            if e.contains(fix.x, fix.y):
                entry = e
                break
        if entry is None:
            discarded.append(fix)
            continue
        if isinstance(grid_dims, tuple):
            h, w = grid_dims
        else:
            try:
                h, w = grid_dims[entry.image_id]
            except KeyError:
                raise PipelineError(
                    f"no grid dimensions for fixated image {entry.image_id!r}"
                ) from None
        x0, y0, x1, y1 = entry.box
        u = (fix.x - x0) / (x1 - x0) * w
        v = (fix.y - y0) / (y1 - y0) * h
        per_image.setdefault(entry.image_id, []).append((u, v, fix.duration_ms))

    grouped = {
        image_id: GridFixations(
            u=np.array([p[0] for p in pts]),
            v=np.array([p[1] for p in pts]),
            duration_ms=np.array([p[2] for p in pts]),
        )
        for image_id, pts in per_image.items()
    }
    return FixationAssignment(per_image=grouped, discarded=tuple(discarded))


def _check_in_range(u, v, grid_hw) -> None:
    h, w = grid_hw
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    bad = (u < 0) | (u > w) | (v < 0) | (v > h)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"fixation grid coordinates ({u.flat[i]}, {v.flat[i]}) outside "
            f"[0, {w}] x [0, {h}]"
        )


def render_fixation(point_uv, grid_hw, config: EncodingConfig) -> np.ndarray:
    """Unnormalized truncated-Gaussian stamp of a single fixation.

    Peak value is 1 when the fixation coincides with a cell center.
    """
    u, v = float(point_uv[0]), float(point_uv[1])
    _check_in_range(u, v, grid_hw)
    h, w = grid_hw
    raw = kernels.accumulate_density(
        np.array([u]), np.array([v]), h, w,
        config.sigma_fix, config.truncation_radius, False,
    )
    return raw.astype(np.float32)


def build_density_map(points_uv, grid_hw, config: EncodingConfig) -> FixationDensityMap:
    """Pool per-fixation stamps and normalize the grid to mean 1.

    ``points_uv`` is an (n, 2) array-like of grid coordinates, n >= 1.
    Average pooling sums stamps coordinate-wise; max pooling takes the
    coordinate-wise maximum. Per-stamp scale is irrelevant after the
    mean-1 normalization, so stamps are not normalized individually.
    """
    pts = np.atleast_2d(np.asarray(points_uv, dtype=np.float64))
    if pts.size == 0:
        raise PipelineError("no fixations on image")
    if pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) fixation points, got shape {pts.shape}")
    u, v = pts[:, 0], pts[:, 1]
    _check_in_range(u, v, grid_hw)
    h, w = grid_hw
    raw = kernels.accumulate_density(
        u, v, h, w, config.sigma_fix, config.truncation_radius, config.pooling == MAX
    )
    total = float(raw.sum())
    if not total > 0:
        raise PipelineError("density map sums to zero; fixations render no mass")
    return FixationDensityMap(data=(raw * (h * w / total)).astype(np.float32))


def uniform_density_map(grid_hw) -> FixationDensityMap:
    """All-ones map: the "global" condition that discards fixation locations."""
    h, w = grid_hw
    return FixationDensityMap(data=np.ones((h, w), dtype=np.float32))
