"""Attention-weighted pooling and classification.

The prediction path for one image is: weight the feature map cell-wise
by the fixation density map (broadcast across channels), reduce each
channel to its spatial mean, then apply a linear head with a softmax.

The spatial reduction is a mean rather than a plain sum; together with
the mean-1 density normalization this makes the uniform map a strict
no-op, so a head trained on a standard GAP network drops in unchanged
and the whole pipeline reduces to that network when location
information is discarded. Storage is float32, reductions accumulate in
float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gazepool import kernels
from gazepool.types import (
    ClassifierHead,
    FeatureMap,
    FixationDensityMap,
    PredictionResult,
    rank_labels,
)

SINGLE_IMAGE = "single-image"
COLLAGE = "collage"


@dataclass(frozen=True)
class GazeWeightedFeatureMap:
    """Feature map multiplied cell-wise by a density map."""

    image_id: str
    data: np.ndarray  # float32 (C, H, W), same shape as the source map

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def grid_hw(self) -> tuple:
        return self.data.shape[1], self.data.shape[2]


@dataclass(frozen=True)
class AttendedClassActivationMap:
    """Spatial evidence for one class under the current gaze weighting.

    Satisfies mean(grid) + bias == logit, which ties the map back to the
    pooled prediction path and makes the rendering checkable.
    """

    class_label: str
    grid: np.ndarray  # float64 (H, W), may be negative
    logit: float
    bias: float

    def __post_init__(self):
        arr = np.asarray(self.grid, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "grid", arr)


def gaze_weighted_feature_map(
    fmap: FeatureMap, fdm: FixationDensityMap
) -> GazeWeightedFeatureMap:
    """Cell-wise product of features and density, density broadcast over channels."""
    if (fmap.height, fmap.width) != (fdm.height, fdm.width):
        raise ValueError(
            f"grid mismatch: features {fmap.height}x{fmap.width} vs "
            f"density {fdm.height}x{fdm.width}"
        )
    return GazeWeightedFeatureMap(
        image_id=fmap.image_id, data=fmap.data * fdm.data[np.newaxis, :, :]
    )


def global_average_pool(wmap) -> np.ndarray:
    """Spatial mean of each channel, float64 accumulation.

    Accepts a FeatureMap or GazeWeightedFeatureMap.
    """
    return wmap.data.mean(axis=(1, 2), dtype=np.float64)


def pooled_features(fmap: FeatureMap, fdm: FixationDensityMap) -> np.ndarray:
    """Density-weighted channel means, fused in one kernel pass.

    Equal to global_average_pool(gaze_weighted_feature_map(fmap, fdm))
    up to float32 rounding of the intermediate products.
    """
    if (fmap.height, fmap.width) != (fdm.height, fdm.width):
        raise ValueError(
            f"grid mismatch: features {fmap.height}x{fmap.width} vs "
            f"density {fdm.height}x{fdm.width}"
        )
    return kernels.weighted_pool(fmap.data, fdm.data)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtracted), float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def classify(features: np.ndarray, head: ClassifierHead) -> PredictionResult:
    """Linear head plus softmax over a pooled feature vector."""
    feat = np.asarray(features, dtype=np.float64)
    if feat.ndim != 1 or feat.shape[0] != head.feature_channels:
        raise ValueError(
            f"feature length {feat.shape} does not match head with "
            f"{head.feature_channels} channels"
        )
    logits = head.weights.astype(np.float64) @ feat + head.bias.astype(np.float64)
    posteriors = softmax(logits)
    return PredictionResult(
        class_labels=head.class_labels,
        posteriors=posteriors,
        ranked_labels=rank_labels(head.class_labels, posteriors),
        scope=SINGLE_IMAGE,
    )


def predict_image(
    fmap: FeatureMap, fdm: FixationDensityMap, head: ClassifierHead
) -> PredictionResult:
    """Full single-image prediction: weighting, pooling, classification."""
    result = classify(pooled_features(fmap, fdm), head)
    return PredictionResult(
        class_labels=result.class_labels,
        posteriors=result.posteriors,
        ranked_labels=result.ranked_labels,
        scope=SINGLE_IMAGE,
        contributing_images=((fmap.image_id, 1.0),),
    )


def present_probability(result: PredictionResult) -> float:
    """Present-class probability of an attribute-binary prediction.

    Binary heads order their labels (absent, present), so this is the
    second posterior entry.
    """
    if len(result.class_labels) != 2:
        raise ValueError("present_probability expects a 2-class result")
    return float(result.posteriors[1])


def rank_attributes(present_probs: Sequence[float], labels: Sequence[str] = None):
    """Attributes by descending present-probability; ties by attribute index.

    The top-ranked attribute is the predicted search attribute. When
    ``labels`` is omitted, attribute indices are returned instead.
    """
    probs = np.asarray(present_probs, dtype=np.float64)
    if probs.size == 0:
        raise ValueError("no attribute probabilities to rank")
    if labels is None:
        labels = tuple(range(probs.size))
    elif len(labels) != probs.size:
        raise ValueError("label count does not match probability count")
    return rank_labels(tuple(labels), probs)


def acam(
    wmap: GazeWeightedFeatureMap, head: ClassifierHead, class_label: str
) -> AttendedClassActivationMap:
    """Attended class activation map: head-weighted sum over channels.

    grid[r, c] = sum_k weights[class, k] * wmap[k, r, c]. With the
    uniform density map this is the standard class activation map of the
    raw features.
    """
    if class_label not in head.class_labels:
        raise ValueError(f"unknown class label {class_label!r}")
    if wmap.channels != head.feature_channels:
        raise ValueError(
            f"channel mismatch: map has {wmap.channels}, head expects "
            f"{head.feature_channels}"
        )
    idx = head.class_labels.index(class_label)
    w_row = head.weights[idx].astype(np.float64)
    grid = np.tensordot(w_row, wmap.data.astype(np.float64), axes=1)
    bias = float(head.bias[idx])
    logit = float(w_row @ global_average_pool(wmap) + bias)
    return AttendedClassActivationMap(
        class_label=class_label, grid=grid, logit=logit, bias=bias
    )
