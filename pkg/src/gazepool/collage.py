"""Evidence integration across the images of a collage.

Per-image posteriors are combined by a weighted average: weights are
proportional to total fixation duration per image when duration
weighting is on, and uniform otherwise. Images that received no
fixation contribute nothing; in global mode an image still counts as
fixated (location is discarded, presence is not).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from gazepool import encoding, pooling
from gazepool.encoding import EncodingConfig
from gazepool.errors import PipelineError
from gazepool.types import (
    ClassifierHead,
    CollageLayout,
    FixationLog,
    PredictionResult,
    rank_labels,
)

LOCAL = "local"
GLOBAL = "global"


@dataclass(frozen=True)
class IntegrationConfig:
    """How per-image evidence is combined into a collage prediction."""

    density_mode: str = LOCAL
    duration_weighting: bool = True

    def __post_init__(self):
        if self.density_mode not in (LOCAL, GLOBAL):
            raise ValueError(
                f"density_mode must be 'local' or 'global', got {self.density_mode!r}"
            )

    def describe(self) -> str:
        suffix = "+duration" if self.duration_weighting else ""
        return f"{self.density_mode}{suffix}"


@dataclass(frozen=True)
class ImageEvidence:
    """One fixated image's posterior and its integration inputs."""

    image_id: str
    posterior: np.ndarray  # (K,) float64, sums to 1
    duration_ms: float
    fixation_count: int

    def __post_init__(self):
        post = np.asarray(self.posterior, dtype=np.float64)
        post.setflags(write=False)
        object.__setattr__(self, "posterior", post)
        if self.duration_ms < 0:
            raise ValueError(f"negative duration {self.duration_ms}")


def integrate(
    evidence, config: IntegrationConfig, class_labels
) -> PredictionResult:
    """Weighted average of per-image posteriors (convex combination).

    Weights are d_i / sum(d) with duration weighting, else 1/n, which is
    plain averaging. The output records each image's weight in
    contributing_images.
    """
    evidence = list(evidence)
    if not evidence:
        raise PipelineError("no fixated images")
    k = evidence[0].posterior.shape[0]
    for ev in evidence:
        if ev.posterior.shape[0] != k:
            raise ValueError(
                f"posterior length mismatch: {ev.image_id!r} has "
                f"{ev.posterior.shape[0]}, expected {k}"
            )
    if config.duration_weighting:
        durations = np.array([ev.duration_ms for ev in evidence], dtype=np.float64)
        total = durations.sum()
        if not total > 0:
            raise PipelineError(
                "duration weighting needs at least one positive fixation duration"
            )
        weights = durations / total
    else:
        weights = np.full(len(evidence), 1.0 / len(evidence))
    posterior = np.zeros(k, dtype=np.float64)
    for w, ev in zip(weights, evidence):
        posterior += w * ev.posterior
    return PredictionResult(
        class_labels=tuple(class_labels),
        posteriors=posterior,
        ranked_labels=rank_labels(tuple(class_labels), posterior),
        scope=pooling.COLLAGE,
        contributing_images=tuple(
            (ev.image_id, float(w)) for ev, w in zip(evidence, weights)
        ),
    )


@dataclass(frozen=True)
class CollageResult:
    """Collage prediction plus per-image diagnostics.

    Diagnostics are first-class so evaluation code never has to
    recompute pipeline internals.
    """

    prediction: PredictionResult
    per_image: dict  # image_id -> single-image PredictionResult
    evidence: tuple  # ImageEvidence in layout order
    discarded_fixations: int


def _pooled_evidence(
    log: FixationLog,
    layout: CollageLayout,
    features: Mapping,
    enc: EncodingConfig,
    cfg: IntegrationConfig,
):
    """Assign fixations and pool features once per fixated image.

    Returns (entries, discarded_count) where each entry is
    (image_id, pooled_vector, total_duration_ms, fixation_count) in
    layout order.
    """
    grid_dims = {
        image_id: (fm.height, fm.width) for image_id, fm in features.items()
    }
    assignment = encoding.assign_fixations(log, layout, grid_dims)
    entries = []
    for entry in layout.entries:  # canonical order
        grid_fix = assignment.per_image.get(entry.image_id)
        if grid_fix is None:
            continue
        fmap = features[entry.image_id]
        hw = (fmap.height, fmap.width)
        if cfg.density_mode == LOCAL:
            fdm = encoding.build_density_map(grid_fix.points(), hw, enc)
        else:
            fdm = encoding.uniform_density_map(hw)
        vec = pooling.pooled_features(fmap, fdm)
        entries.append(
            (entry.image_id, vec, grid_fix.total_duration_ms, grid_fix.count)
        )
    if not entries:
        raise PipelineError("no fixated images")
    return entries, assignment.discarded_count


def run_collage(
    log: FixationLog,
    layout: CollageLayout,
    features: Mapping,
    head: ClassifierHead,
    enc: EncodingConfig = EncodingConfig(),
    cfg: IntegrationConfig = IntegrationConfig(),
) -> CollageResult:
    """Predict the search target of one collage from one fixation log."""
    entries, discarded = _pooled_evidence(log, layout, features, enc, cfg)
    per_image = {}
    evidence = []
    for image_id, vec, duration_ms, count in entries:
        result = pooling.classify(vec, head)
        per_image[image_id] = PredictionResult(
            class_labels=result.class_labels,
            posteriors=result.posteriors,
            ranked_labels=result.ranked_labels,
            scope=pooling.SINGLE_IMAGE,
            contributing_images=((image_id, 1.0),),
        )
        evidence.append(
            ImageEvidence(
                image_id=image_id,
                posterior=result.posteriors,
                duration_ms=duration_ms,
                fixation_count=count,
            )
        )
    prediction = integrate(evidence, cfg, head.class_labels)
    return CollageResult(
        prediction=prediction,
        per_image=per_image,
        evidence=tuple(evidence),
        discarded_fixations=discarded,
    )


@dataclass(frozen=True)
class AttributeCollageResult:
    """Collage-level attribute ranking plus per-attribute integrations."""

    ranked_attributes: tuple
    present_probabilities: dict  # attribute label -> collage present-prob
    per_attribute: dict  # attribute label -> collage-scope PredictionResult
    discarded_fixations: int


def run_collage_attributes(
    log: FixationLog,
    layout: CollageLayout,
    features: Mapping,
    heads: Mapping,
    enc: EncodingConfig = EncodingConfig(),
    cfg: IntegrationConfig = IntegrationConfig(),
) -> AttributeCollageResult:
    """Attribute-task collage prediction over per-attribute binary heads.

    Each attribute's 2-way posteriors are integrated across images
    independently; attributes are then ranked by their collage-level
    present-probability.
    """
    if not heads:
        raise ValueError("no attribute heads")
    entries, discarded = _pooled_evidence(log, layout, features, enc, cfg)
    per_attribute = {}
    probs = {}
    for label, head in heads.items():
        evidence = [
            ImageEvidence(
                image_id=image_id,
                posterior=pooling.classify(vec, head).posteriors,
                duration_ms=duration_ms,
                fixation_count=count,
            )
            for image_id, vec, duration_ms, count in entries
        ]
        combined = integrate(evidence, cfg, head.class_labels)
        per_attribute[label] = combined
        probs[label] = float(combined.posteriors[1])
    labels = tuple(heads.keys())
    ranked = pooling.rank_attributes([probs[l] for l in labels], labels)
    return AttributeCollageResult(
        ranked_attributes=ranked,
        present_probabilities=probs,
        per_attribute=per_attribute,
        discarded_fixations=discarded,
    )
