"""Evaluation protocol: Top-N accuracy over trials, condition grids,
parameter sweeps, noise robustness, and fixation-count curves.

Accuracies are aggregated per participant first; reports carry the mean
and the population standard deviation across participants. Trials are
independent and may be evaluated in parallel (GAZEPOOL_THREADS caps the
pool, 0 means auto, unset means sequential); results are merged in trial
order, so reports do not depend on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from gazepool import collage as collage_mod
from gazepool.collage import GLOBAL, LOCAL, IntegrationConfig
from gazepool.encoding import EncodingConfig
from gazepool.errors import PipelineError
from gazepool.types import ATTRIBUTE, CATEGORY, Fixation, FixationLog

NOISE_LEVELS_PX = (0.0, 60.0, 120.0, 200.0)


@dataclass(frozen=True)
class Trial:
    """One search task: a fixation log plus its ground-truth target."""

    log: FixationLog
    collage_id: str
    target: str
    kind: str = CATEGORY

    def __post_init__(self):
        if self.log.collage_id != self.collage_id:
            raise ValueError(
                f"trial collage {self.collage_id!r} does not match "
                f"log collage {self.log.collage_id!r}"
            )

    @property
    def participant_id(self) -> str:
        return self.log.participant_id


@dataclass(frozen=True)
class EvalCondition:
    """Descriptor of one evaluated configuration."""

    density_mode: str
    duration_weighting: bool
    sigma_fix: float
    fixation_pooling: str
    noise_px: float = 0.0

    def label(self) -> str:
        name = self.density_mode
        if self.duration_weighting:
            name += "+duration"
        return name

    def to_dict(self) -> dict:
        return {
            "density_mode": self.density_mode,
            "duration_weighting": self.duration_weighting,
            "sigma_fix": self.sigma_fix,
            "fixation_pooling": self.fixation_pooling,
            "noise_px": self.noise_px,
        }


@dataclass(frozen=True)
class EvalReport:
    """Per-N accuracy (mean and std across participants) for one condition."""

    condition: EvalCondition
    topn: dict  # n -> (mean, population std)
    per_participant: dict  # participant_id -> {n: accuracy}
    trial_count: int
    failed_trials: int = 0

    def accuracy(self, n: int) -> float:
        return self.topn[n][0]

    def to_dict(self) -> dict:
        return {
            "condition": self.condition.to_dict(),
            "topn": {
                str(n): {"mean": m, "std": s} for n, (m, s) in self.topn.items()
            },
            "per_participant": {
                pid: {str(n): acc for n, acc in accs.items()}
                for pid, accs in self.per_participant.items()
            },
            "trial_count": self.trial_count,
            "failed_trials": self.failed_trials,
        }


def _ranked_of(result) -> tuple:
    if hasattr(result, "ranked_labels"):
        return tuple(result.ranked_labels)
    return tuple(result)


def topn_accuracy(results, n: int) -> float:
    """Fraction of (prediction, truth) pairs with truth in the top n labels.

    ``results`` pairs may hold PredictionResult objects or plain ranked
    label sequences.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    results = list(results)
    if not results:
        raise ValueError("no results to score")
    hits = sum(1 for pred, truth in results if truth in _ranked_of(pred)[:n])
    return hits / len(results)


def inject_noise(
    log: FixationLog, sigma_px: float, seed, screen_size
) -> FixationLog:
    """Add seeded per-axis Gaussian noise to fixation coordinates.

    Coordinates are clamped to the screen; durations and onsets are
    untouched. sigma_px = 0 returns the log unchanged.
    """
    if sigma_px < 0:
        raise ValueError(f"sigma_px must be >= 0, got {sigma_px}")
    if sigma_px == 0:
        return log
    width, height = screen_size
    rng = np.random.default_rng(seed)
    offsets = rng.normal(0.0, sigma_px, size=(len(log.fixations), 2))
    noised = tuple(
        Fixation(
            x=min(max(f.x + dx, 0.0), float(width)),
            y=min(max(f.y + dy, 0.0), float(height)),
            duration_ms=f.duration_ms,
            onset_ms=f.onset_ms,
        )
        for f, (dx, dy) in zip(log.fixations, offsets)
    )
    return FixationLog(
        participant_id=log.participant_id,
        task=log.task,
        collage_id=log.collage_id,
        fixations=noised,
    )


def _max_workers() -> int:
    raw = os.environ.get("GAZEPOOL_THREADS", "")
    if raw == "":
        return 1
    n = int(raw)
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def _map_ordered(fn, items):
    workers = _max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_condition(
    trials,
    layouts,
    features,
    head,
    enc: EncodingConfig = EncodingConfig(),
    cfg: IntegrationConfig = IntegrationConfig(),
    noise=None,
    topn=(1, 2, 3),
) -> EvalReport:
    """Evaluate one condition over all trials.

    ``noise`` is an optional (sigma_px, seed) pair; each trial draws
    from its own child generator keyed by (seed, trial index), so
    subsets of the noise stream never depend on evaluation order. For
    attribute trials ``head`` must be a mapping of attribute label to
    binary head. A trial whose fixations miss every image cannot be
    predicted and is scored as incorrect at every N.
    """
    trials = list(trials)
    if not trials:
        raise ValueError("no trials")

    def evaluate_one(indexed):
        i, trial = indexed
        layout = layouts.get(trial.collage_id)
        if layout is None:
            raise PipelineError(
                f"unresolvable trial {i} (participant {trial.participant_id!r}): "
                f"collage {trial.collage_id!r} not in layouts"
            )
        log = trial.log
        if noise is not None:
            sigma_px, seed = noise
            base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
            log = inject_noise(
                log,
                sigma_px,
                np.random.default_rng(base + (i,)),
                (layout.screen_width_px, layout.screen_height_px),
            )
        try:
            if trial.kind == ATTRIBUTE:
                result = collage_mod.run_collage_attributes(
                    log, layout, features, head, enc, cfg
                )
                return trial, tuple(result.ranked_attributes), False
            result = collage_mod.run_collage(log, layout, features, head, enc, cfg)
            return trial, tuple(result.prediction.ranked_labels), False
        except PipelineError as exc:
            if "no fixated images" in str(exc):
                return trial, (), True
            raise PipelineError(
                f"unresolvable trial {i} (participant {trial.participant_id!r}, "
                f"collage {trial.collage_id!r}): {exc}"
            ) from exc

    outcomes = _map_ordered(evaluate_one, list(enumerate(trials)))

    by_participant: dict = {}
    failed = 0
    for trial, ranked, did_fail in outcomes:
        failed += did_fail
        by_participant.setdefault(trial.participant_id, []).append(
            (ranked, trial.target)
        )
    per_participant = {}
    for pid in sorted(by_participant):
        scored = by_participant[pid]
        per_participant[pid] = {
            n: sum(1 for ranked, truth in scored if truth in ranked[:n]) / len(scored)
            for n in topn
        }
    topn_stats = {}
    for n in topn:
        values = np.array([per_participant[p][n] for p in per_participant])
        topn_stats[n] = (float(values.mean()), float(values.std()))  # population std

    condition = EvalCondition(
        density_mode=cfg.density_mode,
        duration_weighting=cfg.duration_weighting,
        sigma_fix=enc.sigma_fix,
        fixation_pooling=enc.pooling,
        noise_px=0.0 if noise is None else float(noise[0]),
    )
    return EvalReport(
        condition=condition,
        topn=topn_stats,
        per_participant=per_participant,
        trial_count=len(trials),
        failed_trials=failed,
    )


# The four conditions of the reference ablation, in presentation order.
CONDITION_GRID = (
    IntegrationConfig(density_mode=GLOBAL, duration_weighting=False),
    IntegrationConfig(density_mode=LOCAL, duration_weighting=False),
    IntegrationConfig(density_mode=GLOBAL, duration_weighting=True),
    IntegrationConfig(density_mode=LOCAL, duration_weighting=True),
)


def run_condition_grid(
    trials, layouts, features, head,
    enc: EncodingConfig = EncodingConfig(),
    noise=None,
    topn=(1, 2, 3),
):
    """Evaluate the global/local x duration ablation grid."""
    return [
        run_condition(trials, layouts, features, head, enc, cfg, noise, topn)
        for cfg in CONDITION_GRID
    ]


def sigma_sweep(
    trials, layouts, features, head,
    enc: EncodingConfig = EncodingConfig(),
    cfg: IntegrationConfig = IntegrationConfig(),
    sigmas=(1.0, 1.2, 1.4, 1.6, 1.8, 2.0),
    noise=None,
    topn=(1, 2, 3),
):
    """One report per sigma_fix; truncation follows each sigma at 3x."""
    reports = []
    for sigma in sigmas:
        enc_s = replace(enc, sigma_fix=float(sigma), truncation_radius=None)
        reports.append(
            run_condition(trials, layouts, features, head, enc_s, cfg, noise, topn)
        )
    return reports


def truncate_log(log: FixationLog, m: int) -> FixationLog:
    """First m fixations by onset; logs with fewer keep all of theirs."""
    if m >= len(log.fixations):
        return log
    return FixationLog(
        participant_id=log.participant_id,
        task=log.task,
        collage_id=log.collage_id,
        fixations=log.fixations[:m],
    )


def fixation_count_curve(
    trials, layouts, features, head,
    enc: EncodingConfig = EncodingConfig(),
    cfg: IntegrationConfig = IntegrationConfig(),
    max_fixations: int = 12,
    noise=None,
    topn=(1, 2, 3),
):
    """Accuracy as logs are truncated to their first m fixations, m = 1..max."""
    if max_fixations < 1:
        raise ValueError(f"max_fixations must be >= 1, got {max_fixations}")
    curve = []
    for m in range(1, max_fixations + 1):
        truncated = [
            Trial(
                log=truncate_log(t.log, m),
                collage_id=t.collage_id,
                target=t.target,
                kind=t.kind,
            )
            for t in trials
        ]
        curve.append(
            (m, run_condition(truncated, layouts, features, head, enc, cfg, noise, topn))
        )
    return curve


def noise_sweep(
    trials, layouts, features, head,
    enc: EncodingConfig = EncodingConfig(),
    levels=NOISE_LEVELS_PX,
    replications: int = 20,
    seed: int = 0,
    topn=(1, 2, 3),
):
    """Noise-robustness curves for local and global (both duration-weighted).

    Returns a list of rows, one per level:
    (level, mean local Top-N dict, mean global Top-N dict). Each level is
    averaged over ``replications`` independently seeded noise draws
    (level 0 is deterministic and evaluated once).
    """
    local_cfg = IntegrationConfig(density_mode=LOCAL, duration_weighting=True)
    global_cfg = IntegrationConfig(density_mode=GLOBAL, duration_weighting=True)
    rows = []
    for level_idx, level in enumerate(levels):
        reps = 1 if level == 0 else replications
        local_acc = {n: [] for n in topn}
        global_acc = {n: [] for n in topn}
        for r in range(reps):
            noise = None if level == 0 else (level, (seed, level_idx, r))
            for cfg, acc in ((local_cfg, local_acc), (global_cfg, global_acc)):
                report = run_condition(
                    trials, layouts, features, head, enc, cfg, noise, topn
                )
                for n in topn:
                    acc[n].append(report.accuracy(n))
        rows.append(
            (
                float(level),
                {n: float(np.mean(local_acc[n])) for n in topn},
                {n: float(np.mean(global_acc[n])) for n in topn},
            )
        )
    return rows
