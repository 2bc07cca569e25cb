"""Shared domain types and their invariants.

All tensor-carrying types are immutable value objects: construction
normalizes the payload to a fresh non-writeable float32 array, so
instances can be shared freely across threads. Dense data follows the
(channel, row, col) indexing contract, row-major within a channel, with
row 0 at the top of the image.

Structural problems (wrong rank, inconsistent boxes) raise at
construction; value-level invariants (finiteness, normalization, label
counts) are checked by :func:`validate`, which reports instead of
raising so that loaders can refuse bad data with a precise diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

MEAN_ONE_TOL = 1e-6

CATEGORY = "category"
ATTRIBUTE = "attribute"
ATTRIBUTE_BINARY = "attribute-binary"


def _frozen_f32(data, ndim: int, what: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float32, order="C", copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """Per-image activation tensor, indexed (channel, row, col)."""

    image_id: str
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_f32(self.data, 3, "feature map"))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FixationDensityMap:
    """Non-negative attention grid over a feature map's spatial cells.

    Normalization convention: the mean over all cells equals 1, so the
    all-ones map is the uniform ("global") map and density weighting with
    it is the identity.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_f32(self.data, 2, "density map"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Fixation:
    """One gaze fixation in screen pixels."""

    x: float
    y: float
    duration_ms: float
    onset_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "duration_ms", float(self.duration_ms))
        object.__setattr__(self, "onset_ms", float(self.onset_ms))
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"non-finite fixation coordinates ({self.x}, {self.y})")
        if not self.duration_ms >= 0:
            raise ValueError(f"negative fixation duration {self.duration_ms}")


@dataclass(frozen=True)
class SearchTask:
    """Search-target label plus task kind ("category" or "attribute")."""

    label: str
    kind: str = CATEGORY

    def __post_init__(self):
        if self.kind not in (CATEGORY, ATTRIBUTE):
            raise ValueError(f"unknown task kind {self.kind!r}")


@dataclass(frozen=True)
class FixationLog:
    """Ordered fixations of one participant on one collage for one task."""

    participant_id: str
    task: SearchTask
    collage_id: str
    fixations: tuple

    def __post_init__(self):
        object.__setattr__(self, "fixations", tuple(self.fixations))
        onsets = [f.onset_ms for f in self.fixations]
        if any(b < a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("fixations not ordered by onset_ms")


@dataclass(frozen=True)
class CollageEntry:
    """One image slot in a collage: screen box plus feature-map reference."""

    image_id: str
    box: tuple  # (x0, y0, x1, y1) in screen pixels
    feature_ref: str = ""

    def __post_init__(self):
        box = tuple(float(c) for c in self.box)
        if len(box) != 4:
            raise ValueError(f"box must be (x0, y0, x1, y1), got {self.box!r}")
        object.__setattr__(self, "box", box)

    def contains(self, x: float, y: float) -> bool:
        # Half-open on the right/bottom so adjacent boxes never share a point.
        x0, y0, x1, y1 = self.box
        return x0 <= x < x1 and y0 <= y < y1


@dataclass(frozen=True)
class CollageLayout:
    """Binds screen regions of one collage to image ids."""

    collage_id: str
    screen_width_px: float
    screen_height_px: float
    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen = set()
        for e in entries:
            x0, y0, x1, y1 = e.box
            if not (0 <= x0 < x1 <= self.screen_width_px):
                raise ValueError(f"image {e.image_id!r}: x range [{x0}, {x1}] invalid")
            if not (0 <= y0 < y1 <= self.screen_height_px):
                raise ValueError(f"image {e.image_id!r}: y range [{y0}, {y1}] invalid")
            if e.image_id in seen:
                raise ValueError(f"duplicate image id {e.image_id!r} in collage")
            seen.add(e.image_id)
        for i, a in enumerate(entries):
            for b in entries[i + 1 :]:
                if _boxes_overlap(a.box, b.box):
                    raise ValueError(
                        f"boxes of {a.image_id!r} and {b.image_id!r} overlap"
                    )

    def entry_for(self, image_id: str) -> CollageEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)


def _boxes_overlap(a, b) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


@dataclass(frozen=True)
class ClassifierHead:
    """Linear classification head: logits = weights @ features + bias.

    ``task_kind`` is "category" for a K-way head or "attribute-binary"
    for a per-attribute head whose two labels are ordered
    (absent, present).
    """

    task_kind: str
    class_labels: tuple
    weights: np.ndarray  # (K, C)
    bias: np.ndarray  # (K,)

    def __post_init__(self):
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        object.__setattr__(self, "weights", _frozen_f32(self.weights, 2, "weights"))
        object.__setattr__(self, "bias", _frozen_f32(self.bias, 1, "bias"))

    @property
    def num_classes(self) -> int:
        return len(self.class_labels)

    @property
    def feature_channels(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class PredictionResult:
    """Class posteriors plus the deterministic label ranking."""

    class_labels: tuple
    posteriors: np.ndarray  # (K,) float64, sums to 1
    ranked_labels: tuple
    scope: str  # "single-image" | "collage"
    contributing_images: tuple = ()  # ((image_id, weight), ...)

    def __post_init__(self):
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        post = np.array(self.posteriors, dtype=np.float64, copy=True)
        post.setflags(write=False)
        object.__setattr__(self, "posteriors", post)
        object.__setattr__(self, "ranked_labels", tuple(self.ranked_labels))
        object.__setattr__(
            self, "contributing_images", tuple(self.contributing_images)
        )

    def posterior_of(self, label: str) -> float:
        return float(self.posteriors[self.class_labels.index(label)])

    @property
    def top_label(self) -> str:
        return self.ranked_labels[0]


def rank_labels(class_labels: Sequence[str], scores: np.ndarray) -> tuple:
    """Labels by descending score; equal scores rank by ascending label index."""
    order = np.argsort(-np.asarray(scores), kind="stable")
    return tuple(class_labels[i] for i in order)


Validatable = Union[FeatureMap, FixationDensityMap, ClassifierHead]


def validate(obj: Validatable) -> Optional[str]:
    """Check value-level invariants; return the first violation or None.

    Total function: never raises on bad values, only on unsupported types.
    """
    if isinstance(obj, FeatureMap):
        return _validate_feature_map(obj)
    if isinstance(obj, FixationDensityMap):
        return _validate_density_map(obj)
    if isinstance(obj, ClassifierHead):
        return _validate_head(obj)
    raise TypeError(f"validate() does not support {type(obj).__name__}")


def _first_nonfinite(arr: np.ndarray):
    bad = ~np.isfinite(arr)
    if bad.any():
        return tuple(int(i) for i in np.argwhere(bad)[0])
    return None


def _validate_feature_map(fm: FeatureMap) -> Optional[str]:
    c, h, w = fm.data.shape
    if c < 1 or h < 1 or w < 1:
        return f"empty dimension: channels={c}, height={h}, width={w}"
    loc = _first_nonfinite(fm.data)
    if loc is not None:
        return f"non-finite at channel {loc[0]}, row {loc[1]}, col {loc[2]}"
    return None


def _validate_density_map(fdm: FixationDensityMap) -> Optional[str]:
    h, w = fdm.data.shape
    if h < 1 or w < 1:
        return f"empty dimension: height={h}, width={w}"
    loc = _first_nonfinite(fdm.data)
    if loc is not None:
        return f"non-finite at row {loc[0]}, col {loc[1]}"
    neg = fdm.data < 0
    if neg.any():
        r, c = np.argwhere(neg)[0]
        return f"negative value at row {r}, col {c}"
    mean = float(fdm.data.mean(dtype=np.float64))
    if abs(mean - 1.0) > MEAN_ONE_TOL:
        return f"grid mean {mean!r} deviates from 1 beyond tolerance {MEAN_ONE_TOL}"
    return None


def _validate_head(head: ClassifierHead) -> Optional[str]:
    k = len(head.class_labels)
    if head.weights.shape[0] != k:
        return (
            f"row count mismatch: {k} labels vs {head.weights.shape[0]} weight rows"
        )
    if head.bias.shape[0] != k:
        return f"bias length mismatch: {k} labels vs {head.bias.shape[0]} bias entries"
    if head.task_kind == ATTRIBUTE_BINARY and k != 2:
        return f"attribute-binary head must have exactly 2 labels, got {k}"
    if head.task_kind not in (CATEGORY, ATTRIBUTE_BINARY):
        return f"unknown task kind {head.task_kind!r}"
    loc = _first_nonfinite(head.weights)
    if loc is not None:
        return f"non-finite at weights row {loc[0]}, col {loc[1]}"
    loc = _first_nonfinite(head.bias)
    if loc is not None:
        return f"non-finite at bias index {loc[0]}"
    return None
