"""Heatmap image export for density maps and class activation maps.

Maps are min-max normalized to [0, 255] per map (so brightness is not
comparable across files); constant maps render mid-gray. Output is
binary PGM (grayscale) or PPM (color palettes and overlays), both
lossless and bit-deterministic. An optional pre-decoded raster can be
blended under the map, with the grid bilinearly upsampled to the
raster size.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

GRAY = "gray"
HOT = "hot"

PALETTES = (GRAY, HOT)


def _as_grid(heat) -> np.ndarray:
    grid = getattr(heat, "grid", None)
    if grid is None:
        grid = getattr(heat, "data", heat)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError(f"heatmap input must be 2-dimensional, got {grid.shape}")
    if not np.isfinite(grid).all():
        raise ValueError("heatmap input contains non-finite values")
    return grid


def _normalize_u8(grid: np.ndarray) -> np.ndarray:
    lo, hi = float(grid.min()), float(grid.max())
    if hi == lo:
        return np.full(grid.shape, 128, dtype=np.uint8)
    scaled = (grid - lo) / (hi - lo) * 255.0
    return np.rint(scaled).astype(np.uint8)


def _apply_palette(u8: np.ndarray, palette: str) -> np.ndarray:
    """uint8 intensity -> uint8 RGB."""
    x = u8.astype(np.float64) / 255.0
    if palette == HOT:
        r = np.clip(3.0 * x, 0.0, 1.0)
        g = np.clip(3.0 * x - 1.0, 0.0, 1.0)
        b = np.clip(3.0 * x - 2.0, 0.0, 1.0)
        rgb = np.stack([r, g, b], axis=-1)
    else:
        rgb = np.repeat(x[..., None], 3, axis=-1)
    return np.rint(rgb * 255.0).astype(np.uint8)


def bilinear_resize(grid: np.ndarray, out_hw) -> np.ndarray:
    """Upsample a 2-D grid to (out_h, out_w), sampling at cell centers."""
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    out_h, out_w = out_hw
    src_r = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    src_c = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    r0 = np.clip(np.floor(src_r).astype(int), 0, h - 1)
    c0 = np.clip(np.floor(src_c).astype(int), 0, w - 1)
    r1 = np.clip(r0 + 1, 0, h - 1)
    c1 = np.clip(c0 + 1, 0, w - 1)
    fr = np.clip(src_r - r0, 0.0, 1.0)[:, None]
    fc = np.clip(src_c - c0, 0.0, 1.0)[None, :]
    top = grid[np.ix_(r0, c0)] * (1 - fc) + grid[np.ix_(r0, c1)] * fc
    bottom = grid[np.ix_(r1, c0)] * (1 - fc) + grid[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bottom * fr


def _write_pnm(path: Path, pixels: np.ndarray) -> None:
    if pixels.ndim == 2:
        header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n"
    else:
        header = f"P6\n{pixels.shape[1]} {pixels.shape[0]}\n255\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pixels.tobytes())


def export_heatmap(
    heat, path, palette: str = GRAY, overlay=None, overlay_alpha: float = 0.6
) -> Path:
    """Render a map to a PGM/PPM file; returns the written path.

    ``heat`` may be a FixationDensityMap, an AttendedClassActivationMap,
    or a bare 2-D array. With ``overlay`` (a (H, W) or (H, W, 3) raster,
    any numeric dtype in [0, 255]) the normalized map is upsampled to
    the raster size and alpha-blended on top; the output is then PPM.
    """
    if palette not in PALETTES:
        raise ValueError(f"unknown palette {palette!r}, expected one of {PALETTES}")
    path = Path(path)
    grid = _as_grid(heat)

    if overlay is None:
        u8 = _normalize_u8(grid)
        if palette == GRAY:
            _write_pnm(path, u8)
        else:
            _write_pnm(path, _apply_palette(u8, palette))
        return path

    base = np.asarray(overlay, dtype=np.float64)
    if base.ndim == 2:
        base = np.repeat(base[..., None], 3, axis=-1)
    if base.ndim != 3 or base.shape[2] != 3:
        raise ValueError(f"overlay must be (H, W) or (H, W, 3), got {base.shape}")
    if not 0.0 <= overlay_alpha <= 1.0:
        raise ValueError(f"overlay_alpha {overlay_alpha} outside [0, 1]")
    resized = bilinear_resize(grid, base.shape[:2])
    colored = _apply_palette(_normalize_u8(resized), palette).astype(np.float64)
    blended = (1.0 - overlay_alpha) * base + overlay_alpha * colored
    _write_pnm(path, np.rint(np.clip(blended, 0, 255)).astype(np.uint8))
    return path
