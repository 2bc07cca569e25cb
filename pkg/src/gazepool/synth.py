"""Synthetic planted-signal datasets for exercising the full pipeline.

Each class k owns a fixed spot on the feature grid; an image of class k
activates channel k in a smooth Gaussian blob around that spot, plus a
few "confuser" classes activated around their own spots, over a low
uniform noise floor. Under a uniform density map the per-image evidence
is therefore ambiguous among the classes present in the image, while
fixations landing near the target's spot disambiguate it. Search
behavior is a simple mixture: with probability ``p_target`` a fixation
lands inside a target image's class region (with a long dwell),
otherwise anywhere on a distractor image (short dwell). The model
exists to make the pipeline's claims testable, not to model human
vision.

Everything is driven by one seeded generator in a fixed iteration
order, so identical (spec, seed) pairs produce bit-identical datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gazepool.evaluation import Trial
from gazepool.types import (
    CATEGORY,
    ClassifierHead,
    CollageEntry,
    CollageLayout,
    FeatureMap,
    Fixation,
    FixationLog,
    SearchTask,
)


@dataclass(frozen=True)
class SynthSpec:
    """Shape and behavior parameters of a generated dataset."""

    classes: int = 10
    collages_per_class: int = 10
    images_per_collage: int = 20
    participants: int = 14
    grid_hw: tuple = (14, 14)
    screen: tuple = (2560, 1600)
    signal_strength: float = 4.0
    signal_spread_cells: float = 2.5  # Gaussian radius of a class blob
    confusers_per_image: int = 2
    background_noise: float = 0.05
    fixations_min: int = 8
    fixations_max: int = 12
    p_target: float = 0.75
    target_duration_ms: tuple = (480.0, 80.0)  # mean, std
    distractor_duration_ms: tuple = (140.0, 40.0)

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError(f"invalid spec: need >= 2 classes, got {self.classes}")
        if self.images_per_collage < 3:
            raise ValueError(
                "invalid spec: need >= 3 images per collage "
                f"(2 target placements + distractors), got {self.images_per_collage}"
            )
        if self.collages_per_class < 1 or self.participants < 1:
            raise ValueError("invalid spec: counts must be >= 1")
        if not 0 <= self.p_target <= 1:
            raise ValueError(f"invalid spec: p_target {self.p_target} outside [0, 1]")
        if self.confusers_per_image > self.classes - 1:
            raise ValueError("invalid spec: more confusers than other classes")
        if self.fixations_min < 1 or self.fixations_max < self.fixations_min:
            raise ValueError("invalid spec: bad fixation count range")


@dataclass(frozen=True)
class SynthDataset:
    """Generated layouts, features, head, and trials, plus the label list."""

    spec: SynthSpec
    seed: int
    labels: tuple
    layouts: dict  # collage_id -> CollageLayout
    features: dict  # image_id -> FeatureMap
    head: ClassifierHead
    trials: list = field(default_factory=list)
    image_classes: dict = field(default_factory=dict)  # image_id -> label


def class_labels(n: int) -> tuple:
    return tuple(f"class{k:02d}" for k in range(n))


def high_signal_spec(**overrides) -> SynthSpec:
    """Spec variant for noise-robustness studies: large square tiles,
    spatially extended class blobs, and strongly target-locked behavior."""
    params = dict(
        classes=8,
        collages_per_class=4,
        participants=8,
        screen=(6400, 5120),
        signal_spread_cells=4.0,
        p_target=0.85,
        fixations_min=10,
        fixations_max=14,
    )
    params.update(overrides)
    return SynthSpec(**params)


def class_center(k: int, grid_hw, n_classes: int) -> tuple:
    """Grid-coordinate blob center (row, col) for class k.

    Centers sit on a lattice spanning the grid; blobs of different
    classes may overlap spatially, which is harmless since each class
    activates its own channel.
    """
    h, w = grid_hw
    cols = math.ceil(math.sqrt(n_classes))
    rows = math.ceil(n_classes / cols)
    return (k // cols + 0.5) / rows * h, (k % cols + 0.5) / cols * w


def class_region(k: int, grid_hw, n_classes: int, spread: float) -> tuple:
    """Fixation-sampling rectangle (r0, r1, c0, c1) around class k's blob."""
    h, w = grid_hw
    cr, cc = class_center(k, grid_hw, n_classes)
    r0 = float(np.clip(cr - spread, 0.0, h))
    r1 = float(np.clip(cr + spread, 0.0, h))
    c0 = float(np.clip(cc - spread, 0.0, w))
    c1 = float(np.clip(cc + spread, 0.0, w))
    return r0, r1, c0, c1


def _tile_boxes(spec: SynthSpec):
    """Screen boxes for one collage: a tile grid with small gutters."""
    n = spec.images_per_collage
    sw, sh = spec.screen
    cols = math.ceil(math.sqrt(n * sw / sh))
    rows = math.ceil(n / cols)
    tile_w, tile_h = sw / cols, sh / rows
    inset_x, inset_y = 0.03 * tile_w, 0.03 * tile_h
    boxes = []
    for slot in range(n):
        r, c = divmod(slot, cols)
        x0 = c * tile_w + inset_x
        y0 = r * tile_h + inset_y
        boxes.append((x0, y0, x0 + tile_w - 2 * inset_x, y0 + tile_h - 2 * inset_y))
    return boxes


def _blob(grid_hw, center, spread) -> np.ndarray:
    h, w = grid_hw
    rows = np.arange(h) + 0.5 - center[0]
    cols = np.arange(w) + 0.5 - center[1]
    dist2 = rows[:, None] ** 2 + cols[None, :] ** 2
    return np.exp(-dist2 / (2.0 * spread * spread))


def _make_feature_map(image_id, own_class, spec, rng) -> FeatureMap:
    c = spec.classes
    h, w = spec.grid_hw
    data = rng.uniform(0.0, spec.background_noise, size=(c, h, w))
    others = [j for j in range(c) if j != own_class]
    confusers = rng.choice(others, size=spec.confusers_per_image, replace=False)
    for j in (own_class, *confusers):
        center = class_center(j, spec.grid_hw, c)
        data[j] += (
            spec.signal_strength
            * rng.uniform(0.9, 1.1)
            * _blob(spec.grid_hw, center, spec.signal_spread_cells)
        )
    return FeatureMap(image_id=image_id, data=data.astype(np.float32))


def _region_point_on_screen(box, region, grid_hw, rng):
    """Uniform screen point whose grid image lies inside the class region."""
    h, w = grid_hw
    r0, r1, c0, c1 = region
    u = rng.uniform(c0, c1)
    v = rng.uniform(r0, r1)
    x0, y0, x1, y1 = box
    return x0 + u / w * (x1 - x0), y0 + v / h * (y1 - y0)


def _sample_log(participant, target, collage, target_ids, spec, rng) -> FixationLog:
    target_entries = [e for e in collage.entries if e.image_id in target_ids]
    other_entries = [e for e in collage.entries if e.image_id not in target_ids]
    region = class_region(
        target, spec.grid_hw, spec.classes, spec.signal_spread_cells
    )
    n_fix = int(rng.integers(spec.fixations_min, spec.fixations_max + 1))
    fixations = []
    onset = 0.0
    for _ in range(n_fix):
        if rng.random() < spec.p_target:
            entry = target_entries[int(rng.integers(len(target_entries)))]
            x, y = _region_point_on_screen(entry.box, region, spec.grid_hw, rng)
            mean, std = spec.target_duration_ms
        else:
            entry = other_entries[int(rng.integers(len(other_entries)))]
            x0, y0, x1, y1 = entry.box
            x, y = rng.uniform(x0, x1), rng.uniform(y0, y1)
            mean, std = spec.distractor_duration_ms
        duration = max(60.0, rng.normal(mean, std))
        fixations.append(Fixation(x=x, y=y, duration_ms=duration, onset_ms=onset))
        onset += duration + rng.uniform(20.0, 80.0)
    labels = class_labels(spec.classes)
    return FixationLog(
        participant_id=participant,
        task=SearchTask(label=labels[target], kind=CATEGORY),
        collage_id=collage.collage_id,
        fixations=tuple(fixations),
    )


def generate_dataset(spec: SynthSpec, seed: int) -> SynthDataset:
    """Deterministically build layouts, features, the head, and trials."""
    rng = np.random.default_rng(seed)
    labels = class_labels(spec.classes)
    boxes = _tile_boxes(spec)

    layouts: dict = {}
    features: dict = {}
    image_classes: dict = {}
    target_ids: dict = {}  # collage_id -> frozenset of target image ids
    for target in range(spec.classes):
        for m in range(spec.collages_per_class):
            collage_id = f"c{target:02d}x{m:02d}"
            target_slots = set(
                int(s)
                for s in rng.choice(spec.images_per_collage, size=2, replace=False)
            )
            others = [j for j in range(spec.classes) if j != target]
            entries = []
            for slot in range(spec.images_per_collage):
                image_id = f"{collage_id}-i{slot:02d}"
                own = target if slot in target_slots else int(rng.choice(others))
                features[image_id] = _make_feature_map(image_id, own, spec, rng)
                image_classes[image_id] = labels[own]
                entries.append(
                    CollageEntry(
                        image_id=image_id, box=boxes[slot], feature_ref=image_id
                    )
                )
            layouts[collage_id] = CollageLayout(
                collage_id=collage_id,
                screen_width_px=spec.screen[0],
                screen_height_px=spec.screen[1],
                entries=tuple(entries),
            )
            target_ids[collage_id] = frozenset(
                f"{collage_id}-i{slot:02d}" for slot in target_slots
            )

    head = ClassifierHead(
        task_kind=CATEGORY,
        class_labels=labels,
        weights=np.eye(spec.classes, dtype=np.float32),
        bias=np.zeros(spec.classes, dtype=np.float32),
    )

    trials = []
    for p in range(spec.participants):
        participant = f"p{p:02d}"
        for target in range(spec.classes):
            for m in range(spec.collages_per_class):
                collage = layouts[f"c{target:02d}x{m:02d}"]
                log = _sample_log(
                    participant,
                    target,
                    collage,
                    target_ids[collage.collage_id],
                    spec,
                    rng,
                )
                trials.append(
                    Trial(
                        log=log,
                        collage_id=collage.collage_id,
                        target=labels[target],
                        kind=CATEGORY,
                    )
                )
    return SynthDataset(
        spec=spec,
        seed=seed,
        labels=labels,
        layouts=layouts,
        features=features,
        head=head,
        trials=trials,
        image_classes=image_classes,
    )
