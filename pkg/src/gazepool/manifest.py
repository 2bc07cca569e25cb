"""Dataset manifests and fixation-log files.

A manifest is a YAML document binding collage layouts, image ids to
tensor-file paths, classifier heads, label lists, and trial definitions.
Fixation logs are CSV with a mandatory header:

    participant_id,task_kind,task_label,collage_id,onset_ms,duration_ms,x_px,y_px

Rows of one (participant, collage, task) group must be sorted by
onset_ms. All paths inside a manifest are relative to its directory and
must exist at load time; loaders validate every tensor they read and
refuse invalid data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from gazepool import tensorio
from gazepool.errors import FormatError
from gazepool.evaluation import Trial
from gazepool.types import (
    ATTRIBUTE,
    ATTRIBUTE_BINARY,
    CATEGORY,
    ClassifierHead,
    CollageEntry,
    CollageLayout,
    FeatureMap,
    Fixation,
    FixationLog,
    SearchTask,
    validate,
)

LOG_COLUMNS = (
    "participant_id",
    "task_kind",
    "task_label",
    "collage_id",
    "onset_ms",
    "duration_ms",
    "x_px",
    "y_px",
)


def write_fixation_log(path, logs) -> None:
    """Write fixation logs as one CSV, one row per fixation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for log in logs:
            for f in log.fixations:
                writer.writerow(
                    [
                        log.participant_id,
                        log.task.kind,
                        log.task.label,
                        log.collage_id,
                        repr(f.onset_ms),
                        repr(f.duration_ms),
                        repr(f.x),
                        repr(f.y),
                    ]
                )


def read_fixation_log(path) -> list:
    """Parse a fixation CSV into FixationLog objects, in file order.

    Rows are grouped by (participant, collage, task label, task kind);
    a group out of onset order is a format error naming the line.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"{path}: cannot read fixation log: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, header row is mandatory") from None
        if tuple(header) != LOG_COLUMNS:
            raise FormatError(
                f"{path}: bad header {header!r}, expected {','.join(LOG_COLUMNS)}"
            )
        groups: dict = {}
        last_onset: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(LOG_COLUMNS):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(LOG_COLUMNS)} fields, "
                    f"got {len(row)}"
                )
            pid, kind, label, collage_id = row[0], row[1], row[2], row[3]
            try:
                onset, duration, x, y = (float(v) for v in row[4:8])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad number: {exc}") from exc
            key = (pid, collage_id, label, kind)
            if key in last_onset and onset < last_onset[key]:
                raise FormatError(
                    f"{path}:{lineno}: fixations of participant {pid!r} on "
                    f"collage {collage_id!r} not sorted by onset_ms"
                )
            last_onset[key] = onset
            try:
                fix = Fixation(x=x, y=y, duration_ms=duration, onset_ms=onset)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            groups.setdefault(key, []).append(fix)
    logs = []
    for (pid, collage_id, label, kind), fixations in groups.items():
        try:
            task = SearchTask(label=label, kind=kind)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
        logs.append(
            FixationLog(
                participant_id=pid,
                task=task,
                collage_id=collage_id,
                fixations=tuple(fixations),
            )
        )
    return logs


@dataclass(frozen=True)
class TrialDef:
    """One trial row of a manifest, paths unresolved."""

    participant: str
    kind: str
    target: str
    collage: str
    log_path: Path


@dataclass
class Manifest:
    """Parsed manifest with resolved, existence-checked paths."""

    root: Path
    screen: tuple
    labels: tuple
    layouts: dict  # collage_id -> CollageLayout
    feature_paths: dict  # image_id -> Path
    category_head_paths: tuple = None  # (weights, bias) or None
    attribute_head_paths: list = field(default_factory=list)  # (label, w, b)
    attribute_labels: tuple = ()
    trial_defs: list = field(default_factory=list)


def _require(mapping, key, where):
    if key not in mapping:
        raise FormatError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _resolve(root: Path, rel, where) -> Path:
    path = root / str(rel)
    if not path.exists():
        raise FormatError(f"{where}: referenced path {str(rel)!r} does not exist")
    return path


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise FormatError(f"{path}: cannot read manifest: {exc}") from exc
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: manifest must be a mapping")
    root = path.parent
    where = str(path)

    screen_doc = _require(doc, "screen", where)
    screen = (float(screen_doc["width_px"]), float(screen_doc["height_px"]))
    labels = tuple(str(l) for l in _require(doc, "labels", where))

    layouts = {}
    feature_paths = {}
    for cdoc in _require(doc, "collages", where):
        cid = str(_require(cdoc, "id", where))
        entries = []
        for idoc in _require(cdoc, "images", where):
            image_id = str(_require(idoc, "id", where))
            box = tuple(float(v) for v in _require(idoc, "box", where))
            feature_rel = str(_require(idoc, "features", where))
            feature_paths[image_id] = _resolve(
                root, feature_rel, f"{where}: collage {cid!r}"
            )
            entries.append(
                CollageEntry(image_id=image_id, box=box, feature_ref=feature_rel)
            )
        try:
            layouts[cid] = CollageLayout(
                collage_id=cid,
                screen_width_px=screen[0],
                screen_height_px=screen[1],
                entries=tuple(entries),
            )
        except ValueError as exc:
            raise FormatError(f"{where}: collage {cid!r}: {exc}") from exc

    heads_doc = doc.get("heads", {})
    category_head_paths = None
    if "category" in heads_doc:
        hdoc = heads_doc["category"]
        category_head_paths = (
            _resolve(root, _require(hdoc, "weights", where), where),
            _resolve(root, _require(hdoc, "bias", where), where),
        )
    attribute_head_paths = []
    for adoc in heads_doc.get("attributes", []):
        attribute_head_paths.append(
            (
                str(_require(adoc, "label", where)),
                _resolve(root, _require(adoc, "weights", where), where),
                _resolve(root, _require(adoc, "bias", where), where),
            )
        )
    attribute_labels = tuple(label for label, _, _ in attribute_head_paths)

    trial_defs = []
    for tdoc in doc.get("trials", []):
        kind = str(tdoc.get("kind", CATEGORY))
        target = str(_require(tdoc, "target", where))
        collage = str(_require(tdoc, "collage", where))
        if collage not in layouts:
            raise FormatError(f"{where}: trial references unknown collage {collage!r}")
        known = labels if kind == CATEGORY else attribute_labels
        if target not in known:
            raise FormatError(
                f"{where}: trial target {target!r} not in the {kind} label list"
            )
        trial_defs.append(
            TrialDef(
                participant=str(_require(tdoc, "participant", where)),
                kind=kind,
                target=target,
                collage=collage,
                log_path=_resolve(root, _require(tdoc, "log", where), where),
            )
        )
    return Manifest(
        root=root,
        screen=screen,
        labels=labels,
        layouts=layouts,
        feature_paths=feature_paths,
        category_head_paths=category_head_paths,
        attribute_head_paths=attribute_head_paths,
        attribute_labels=attribute_labels,
        trial_defs=trial_defs,
    )


def load_feature_map(manifest: Manifest, image_id: str) -> FeatureMap:
    path = manifest.feature_paths[image_id]
    fm = FeatureMap(image_id=image_id, data=tensorio.load_tensor(path))
    violation = validate(fm)
    if violation is not None:
        raise FormatError(f"{path}: invalid feature map: {violation}")
    return fm


def load_category_head(manifest: Manifest) -> ClassifierHead:
    if manifest.category_head_paths is None:
        raise FormatError(f"{manifest.root}: manifest defines no category head")
    wpath, bpath = manifest.category_head_paths
    head = ClassifierHead(
        task_kind=CATEGORY,
        class_labels=manifest.labels,
        weights=tensorio.load_tensor(wpath),
        bias=tensorio.load_tensor(bpath),
    )
    violation = validate(head)
    if violation is not None:
        raise FormatError(f"{wpath}: invalid classifier head: {violation}")
    return head


def load_attribute_heads(manifest: Manifest) -> dict:
    heads = {}
    for label, wpath, bpath in manifest.attribute_head_paths:
        head = ClassifierHead(
            task_kind=ATTRIBUTE_BINARY,
            class_labels=("absent", "present"),
            weights=tensorio.load_tensor(wpath),
            bias=tensorio.load_tensor(bpath),
        )
        violation = validate(head)
        if violation is not None:
            raise FormatError(f"{wpath}: invalid attribute head: {violation}")
        heads[label] = head
    return heads


@dataclass
class LoadedDataset:
    """Everything needed to run predictions: in-memory domain objects."""

    manifest: Manifest
    layouts: dict
    features: dict
    head: ClassifierHead
    attribute_heads: dict
    trials: list


def load_dataset(manifest_path, collage_ids=None) -> LoadedDataset:
    """Load a manifest tree; restrict to ``collage_ids`` when given."""
    manifest = load_manifest(manifest_path)
    if collage_ids is None:
        layouts = dict(manifest.layouts)
    else:
        missing = [c for c in collage_ids if c not in manifest.layouts]
        if missing:
            raise FormatError(
                f"{manifest_path}: unknown collage id(s) {', '.join(missing)}"
            )
        layouts = {c: manifest.layouts[c] for c in collage_ids}
    features = {}
    for cid, layout in layouts.items():
        for entry in layout.entries:
            features[entry.image_id] = load_feature_map(manifest, entry.image_id)
    head = (
        load_category_head(manifest)
        if manifest.category_head_paths is not None
        else None
    )
    attribute_heads = load_attribute_heads(manifest)

    logs_by_key = {}
    for log_path in sorted({td.log_path for td in manifest.trial_defs}):
        for log in read_fixation_log(log_path):
            key = (log.participant_id, log.collage_id, log.task.label, log.task.kind)
            logs_by_key[key] = log
    trials = []
    for td in manifest.trial_defs:
        if collage_ids is not None and td.collage not in layouts:
            continue
        log = logs_by_key.get((td.participant, td.collage, td.target, td.kind))
        if log is None:
            raise FormatError(
                f"{td.log_path}: no fixation rows for participant "
                f"{td.participant!r}, collage {td.collage!r}, target {td.target!r}"
            )
        trials.append(
            Trial(log=log, collage_id=td.collage, target=td.target, kind=td.kind)
        )
    return LoadedDataset(
        manifest=manifest,
        layouts=layouts,
        features=features,
        head=head,
        attribute_heads=attribute_heads,
        trials=trials,
    )


def write_synth_dataset(root, dataset) -> Path:
    """Write a generated dataset as a manifest tree; returns the manifest path.

    Layout under ``root``: manifest.yaml, tensors/<image>.gzpl,
    heads/category_{weights,bias}.gzpl, logs/fixations.csv.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    for image_id, fm in dataset.features.items():
        tensorio.store_tensor(root / "tensors" / f"{image_id}.gzpl", fm.data)
    tensorio.store_tensor(
        root / "heads" / "category_weights.gzpl", dataset.head.weights
    )
    tensorio.store_tensor(root / "heads" / "category_bias.gzpl", dataset.head.bias)
    write_fixation_log(
        root / "logs" / "fixations.csv", [t.log for t in dataset.trials]
    )

    collages = []
    for cid, layout in dataset.layouts.items():
        collages.append(
            {
                "id": cid,
                "images": [
                    {
                        "id": e.image_id,
                        "box": [float(v) for v in e.box],
                        "features": f"tensors/{e.image_id}.gzpl",
                    }
                    for e in layout.entries
                ],
            }
        )
    doc = {
        "screen": {
            "width_px": float(dataset.spec.screen[0]),
            "height_px": float(dataset.spec.screen[1]),
        },
        "labels": list(dataset.labels),
        "heads": {
            "category": {
                "weights": "heads/category_weights.gzpl",
                "bias": "heads/category_bias.gzpl",
            }
        },
        "collages": collages,
        "trials": [
            {
                "participant": t.log.participant_id,
                "kind": t.kind,
                "target": t.target,
                "collage": t.collage_id,
                "log": "logs/fixations.csv",
            }
            for t in dataset.trials
        ],
    }
    manifest_path = root / "manifest.yaml"
    manifest_path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return manifest_path
