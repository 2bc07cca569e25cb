"""Command-line interface.

Subcommands: predict, evaluate, sweep-sigma, sweep-noise, acam, synth,
fixation-curve. Global flags (before the subcommand): --manifest,
--seed, --out, --format. All randomness derives from --seed, and
identical inputs plus flags produce byte-identical reports. Failures
exit nonzero with a single "error: ..." line on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from gazepool import evaluation, heatmap, manifest as manifest_mod, pooling, synth
from gazepool.collage import IntegrationConfig, run_collage, run_collage_attributes
from gazepool.encoding import EncodingConfig, assign_fixations, build_density_map, uniform_density_map
from gazepool.errors import GazePoolError
from gazepool.types import ATTRIBUTE, CATEGORY


def _f(x: float) -> str:
    return f"{x:.6f}"


def _table(rows, header) -> str:
    widths = [
        max(len(str(header[i])), *(len(str(r[i])) for r in rows)) if rows else len(str(header[i]))
        for i in range(len(header))
    ]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths)).rstrip()]
    for r in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _csv_lines(rows, header) -> str:
    out = [",".join(str(h) for h in header)]
    out.extend(",".join(str(c) for c in row) for row in rows)
    return "\n".join(out) + "\n"


def _emit(ctx_obj, text: str) -> None:
    out = ctx_obj.get("out")
    if out is None:
        sys.stdout.write(text)
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _load_dataset(ctx_obj, collage_ids=None):
    path = ctx_obj.get("manifest")
    if path is None:
        raise click.UsageError("--manifest is required for this command")
    return manifest_mod.load_dataset(path, collage_ids=collage_ids)


def condition_options(fn):
    fn = click.option(
        "--mode", type=click.Choice(["local", "global"]), default="local",
        show_default=True, help="Use fixation locations or discard them.",
    )(fn)
    fn = click.option(
        "--duration-weighting", is_flag=True, default=False,
        help="Weight per-image posteriors by total fixation duration.",
    )(fn)
    fn = click.option(
        "--sigma-fix", type=float, default=1.6, show_default=True,
        help="Per-fixation Gaussian stddev in grid cells.",
    )(fn)
    fn = click.option(
        "--fixation-pooling", type=click.Choice(["avg", "max"]), default="avg",
        show_default=True, help="How per-fixation stamps combine.",
    )(fn)
    return fn


def _enc(sigma_fix, fixation_pooling) -> EncodingConfig:
    pooling_name = "average" if fixation_pooling == "avg" else "max"
    return EncodingConfig(sigma_fix=sigma_fix, pooling=pooling_name)


def _cfg(mode, duration_weighting) -> IntegrationConfig:
    return IntegrationConfig(density_mode=mode, duration_weighting=duration_weighting)


@click.group()
@click.option("--manifest", type=click.Path(), default=None, help="Dataset manifest.")
@click.option("--seed", type=int, default=0, show_default=True, help="Master RNG seed.")
@click.option("--out", type=click.Path(), default=None, help="Output file or directory.")
@click.option(
    "--format", "fmt", type=click.Choice(["text", "json", "csv"]), default="text",
    show_default=True, help="Report format.",
)
@click.pass_context
def cli(ctx, manifest, seed, out, fmt):
    """Gaze-weighted search-target prediction toolkit."""
    ctx.obj = {"manifest": manifest, "seed": seed, "out": out, "fmt": fmt}


def _find_trial(ds, collage, participant, task):
    for trial in ds.trials:
        if (
            trial.collage_id == collage
            and trial.participant_id == participant
            and trial.target == task
        ):
            return trial
    raise GazePoolError(
        f"no trial for participant {participant!r}, collage {collage!r}, "
        f"task {task!r} in the manifest"
    )


def _prediction_payload(trial, result, cfg, enc):
    if trial.kind == ATTRIBUTE:
        ranked = list(result.ranked_attributes)
        scores = [result.present_probabilities[a] for a in ranked]
        contributing = []
        discarded = result.discarded_fixations
    else:
        pred = result.prediction
        ranked = list(pred.ranked_labels)
        scores = [pred.posterior_of(l) for l in ranked]
        contributing = [
            {"image_id": i, "weight": w} for i, w in pred.contributing_images
        ]
        discarded = result.discarded_fixations
    return {
        "participant": trial.participant_id,
        "collage": trial.collage_id,
        "task": trial.target,
        "kind": trial.kind,
        "condition": {
            "density_mode": cfg.density_mode,
            "duration_weighting": cfg.duration_weighting,
            "sigma_fix": enc.sigma_fix,
            "fixation_pooling": enc.pooling,
        },
        "ranked": [
            {"rank": i + 1, "label": l, "score": s}
            for i, (l, s) in enumerate(zip(ranked, scores))
        ],
        "contributing_images": contributing,
        "discarded_fixations": discarded,
    }


@cli.command()
@click.option("--collage", required=True, help="Collage id.")
@click.option("--participant", required=True, help="Participant id.")
@click.option("--task", required=True, help="Search-target label of the trial.")
@condition_options
@click.pass_context
def predict(ctx, collage, participant, task, mode, duration_weighting, sigma_fix, fixation_pooling):
    """Predict the search target of one recorded trial."""
    ds = _load_dataset(ctx.obj, collage_ids=[collage])
    trial = _find_trial(ds, collage, participant, task)
    enc = _enc(sigma_fix, fixation_pooling)
    cfg = _cfg(mode, duration_weighting)
    if trial.kind == ATTRIBUTE:
        result = run_collage_attributes(
            trial.log, ds.layouts[collage], ds.features, ds.attribute_heads, enc, cfg
        )
    else:
        result = run_collage(
            trial.log, ds.layouts[collage], ds.features, ds.head, enc, cfg
        )
    payload = _prediction_payload(trial, result, cfg, enc)

    fmt = ctx.obj["fmt"]
    if fmt == "json":
        _emit(ctx.obj, json.dumps(payload, indent=2) + "\n")
    elif fmt == "csv":
        rows = [
            (r["rank"], r["label"], _f(r["score"])) for r in payload["ranked"]
        ]
        _emit(ctx.obj, _csv_lines(rows, ("rank", "label", "score")))
    else:
        lines = [
            f"collage {collage}, participant {participant}, task {task} ({trial.kind})",
            f"condition: {cfg.describe()}, sigma_fix {enc.sigma_fix}, "
            f"{enc.pooling} fixation pooling",
        ]
        rows = [
            (r["rank"], r["label"], _f(r["score"])) for r in payload["ranked"]
        ]
        lines.append(_table(rows, ("rank", "label", "score")).rstrip())
        if payload["contributing_images"]:
            parts = ", ".join(
                f"{c['image_id']}={_f(c['weight'])}"
                for c in payload["contributing_images"]
            )
            lines.append(f"contributing images: {parts}")
        lines.append(f"discarded fixations: {payload['discarded_fixations']}")
        _emit(ctx.obj, "\n".join(lines) + "\n")


def _format_reports(reports, fmt, topn=(1, 2, 3)) -> str:
    if fmt == "json":
        return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
    if fmt == "csv":
        header = (
            "condition", "density_mode", "duration_weighting", "sigma_fix",
            "fixation_pooling", "noise_px", "row",
            *(f"top{n}" for n in topn), "trials", "failed",
        )
        rows = []
        for rep in reports:
            cond = rep.condition
            base = (
                cond.label(), cond.density_mode, str(cond.duration_weighting).lower(),
                _f(cond.sigma_fix), cond.fixation_pooling, _f(cond.noise_px),
            )
            rows.append(
                (*base, "mean", *(_f(rep.topn[n][0]) for n in topn),
                 rep.trial_count, rep.failed_trials)
            )
            rows.append(
                (*base, "std", *(_f(rep.topn[n][1]) for n in topn),
                 rep.trial_count, rep.failed_trials)
            )
            for pid in sorted(rep.per_participant):
                accs = rep.per_participant[pid]
                rows.append(
                    (*base, pid, *(_f(accs[n]) for n in topn),
                     rep.trial_count, rep.failed_trials)
                )
        return _csv_lines(rows, header)
    header = ("condition", "sigma_fix", "pooling", "noise_px",
              *(f"top{n}" for n in topn), "trials")
    rows = []
    for rep in reports:
        cond = rep.condition
        rows.append(
            (
                cond.label(),
                _f(cond.sigma_fix),
                cond.fixation_pooling,
                _f(cond.noise_px),
                *(
                    f"{_f(rep.topn[n][0])}±{_f(rep.topn[n][1])}"
                    for n in topn
                ),
                rep.trial_count,
            )
        )
    return _table(rows, header)


@cli.command()
@condition_options
@click.option("--noise-px", type=float, default=0.0, show_default=True,
              help="Gaussian tracker-noise stddev in pixels.")
@click.option("--topn", default="1,2,3", show_default=True,
              help="Comma-separated ranks to report.")
@click.option("--grid", type=click.Choice(["table1"]), default=None,
              help="Run the four-condition global/local x duration grid.")
@click.pass_context
def evaluate(ctx, mode, duration_weighting, sigma_fix, fixation_pooling,
             noise_px, topn, grid):
    """Evaluate Top-N accuracy over all trials in the manifest."""
    ds = _load_dataset(ctx.obj)
    enc = _enc(sigma_fix, fixation_pooling)
    ns = tuple(int(n) for n in topn.split(","))
    noise = None if noise_px == 0 else (noise_px, ctx.obj["seed"])

    by_kind = {}
    for t in ds.trials:
        by_kind.setdefault(t.kind, []).append(t)
    reports = []
    for kind in sorted(by_kind):
        trials = by_kind[kind]
        head = ds.attribute_heads if kind == ATTRIBUTE else ds.head
        if grid == "table1":
            reports.extend(
                evaluation.run_condition_grid(
                    trials, ds.layouts, ds.features, head, enc, noise, ns
                )
            )
        else:
            reports.append(
                evaluation.run_condition(
                    trials, ds.layouts, ds.features, head, enc,
                    _cfg(mode, duration_weighting), noise, ns,
                )
            )
    _emit(ctx.obj, _format_reports(reports, ctx.obj["fmt"], ns))


@cli.command("sweep-sigma")
@click.option("--sigmas", default="1.0,1.2,1.4,1.6,1.8,2.0", show_default=True,
              help="Comma-separated sigma_fix values.")
@click.option("--mode", type=click.Choice(["local", "global"]), default="local",
              show_default=True)
@click.option("--duration-weighting", is_flag=True, default=False)
@click.option("--fixation-pooling", type=click.Choice(["avg", "max"]), default="avg",
              show_default=True)
@click.pass_context
def sweep_sigma(ctx, sigmas, mode, duration_weighting, fixation_pooling):
    """Per-sigma accuracy reports (encoding sensitivity)."""
    ds = _load_dataset(ctx.obj)
    values = tuple(float(s) for s in sigmas.split(","))
    reports = evaluation.sigma_sweep(
        ds.trials, ds.layouts, ds.features, ds.head,
        _enc(1.6, fixation_pooling), _cfg(mode, duration_weighting),
        sigmas=values,
    )
    _emit(ctx.obj, _format_reports(reports, ctx.obj["fmt"]))


@cli.command("sweep-noise")
@click.option("--levels", default="0,60,120,200", show_default=True,
              help="Comma-separated noise levels in pixels.")
@click.option("--replications", type=int, default=20, show_default=True,
              help="Seeded noise replications per level.")
@click.pass_context
def sweep_noise(ctx, levels, replications):
    """Noise-robustness curves for local and global (duration-weighted)."""
    ds = _load_dataset(ctx.obj)
    level_values = tuple(float(v) for v in levels.split(","))
    rows = evaluation.noise_sweep(
        ds.trials, ds.layouts, ds.features, ds.head,
        levels=level_values, replications=replications, seed=ctx.obj["seed"],
    )
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        payload = [
            {
                "noise_px": level,
                "local": {str(n): acc for n, acc in local.items()},
                "global": {str(n): acc for n, acc in glob.items()},
            }
            for level, local, glob in rows
        ]
        _emit(ctx.obj, json.dumps(payload, indent=2) + "\n")
        return
    header = ("noise_px", "local_top1", "local_top2", "local_top3",
              "global_top1", "global_top2", "global_top3")
    table_rows = [
        (_f(level), _f(local[1]), _f(local[2]), _f(local[3]),
         _f(glob[1]), _f(glob[2]), _f(glob[3]))
        for level, local, glob in rows
    ]
    if fmt == "csv":
        _emit(ctx.obj, _csv_lines(table_rows, header))
    else:
        _emit(ctx.obj, _table(table_rows, header))


@cli.command()
@click.option("--collage", required=True)
@click.option("--participant", required=True)
@click.option("--task", required=True)
@click.option("--top", type=int, default=3, show_default=True,
              help="Render maps for the top-N predicted classes.")
@condition_options
@click.pass_context
def acam(ctx, collage, participant, task, top, mode, duration_weighting,
         sigma_fix, fixation_pooling):
    """Export attended class activation maps for one trial."""
    out_dir = Path(ctx.obj["out"] or "acam-out")
    ds = _load_dataset(ctx.obj, collage_ids=[collage])
    trial = _find_trial(ds, collage, participant, task)
    if trial.kind == ATTRIBUTE:
        raise GazePoolError("acam rendering supports category trials only")
    enc = _enc(sigma_fix, fixation_pooling)
    cfg = _cfg(mode, duration_weighting)
    layout = ds.layouts[collage]
    result = run_collage(trial.log, layout, ds.features, ds.head, enc, cfg)
    top_labels = result.prediction.ranked_labels[:top]

    grid_dims = {i: (fm.height, fm.width) for i, fm in ds.features.items()}
    assignment = assign_fixations(trial.log, layout, grid_dims)
    written = []
    for entry in layout.entries:
        grid_fix = assignment.per_image.get(entry.image_id)
        if grid_fix is None:
            continue
        fmap = ds.features[entry.image_id]
        hw = (fmap.height, fmap.width)
        if cfg.density_mode == "local":
            fdm = build_density_map(grid_fix.points(), hw, enc)
        else:
            fdm = uniform_density_map(hw)
        fdm_path = out_dir / f"{entry.image_id}_fdm.pgm"
        heatmap.export_heatmap(fdm, fdm_path)
        written.append(str(fdm_path))
        wmap = pooling.gaze_weighted_feature_map(fmap, fdm)
        for label in top_labels:
            amap = pooling.acam(wmap, ds.head, label)
            map_path = out_dir / f"{entry.image_id}_acam_{label}.pgm"
            heatmap.export_heatmap(amap, map_path)
            written.append(str(map_path))

    sidecar = {
        "prediction": _prediction_payload(trial, result, cfg, enc),
        "top_labels": list(top_labels),
        "files": written,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    sidecar_path = out_dir / "prediction.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    sys.stdout.write(f"wrote {len(written)} heatmaps and {sidecar_path}\n")


@cli.command("synth")
@click.option("--classes", type=int, default=10, show_default=True)
@click.option("--collages", type=int, default=10, show_default=True,
              help="Collages per class.")
@click.option("--images-per-collage", type=int, default=20, show_default=True)
@click.option("--participants", type=int, default=14, show_default=True)
@click.option("--preset", type=click.Choice(["standard", "high-signal"]),
              default="standard", show_default=True,
              help="Base parameter set for the generator.")
@click.pass_context
def synth_cmd(ctx, classes, collages, images_per_collage, participants, preset):
    """Generate a synthetic dataset and write a full manifest tree."""
    out_dir = ctx.obj["out"]
    if out_dir is None:
        raise click.UsageError("--out DIRECTORY is required for synth")
    overrides = dict(
        classes=classes,
        collages_per_class=collages,
        images_per_collage=images_per_collage,
        participants=participants,
    )
    if preset == "high-signal":
        spec = synth.high_signal_spec(**overrides)
    else:
        spec = synth.SynthSpec(**overrides)
    ds = synth.generate_dataset(spec, seed=ctx.obj["seed"])
    manifest_path = manifest_mod.write_synth_dataset(out_dir, ds)
    sys.stdout.write(
        f"wrote {manifest_path} ({len(ds.layouts)} collages, "
        f"{len(ds.features)} images, {len(ds.trials)} trials)\n"
    )


@cli.command("fixation-curve")
@click.option("--max-fixations", type=int, default=12, show_default=True)
@condition_options
@click.pass_context
def fixation_curve(ctx, max_fixations, mode, duration_weighting, sigma_fix,
                   fixation_pooling):
    """Accuracy over increasing fixation-count prefixes."""
    ds = _load_dataset(ctx.obj)
    curve = evaluation.fixation_count_curve(
        ds.trials, ds.layouts, ds.features, ds.head,
        _enc(sigma_fix, fixation_pooling), _cfg(mode, duration_weighting),
        max_fixations=max_fixations,
    )
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        payload = [
            {"fixations": m, **{f"top{n}": rep.topn[n][0] for n in (1, 2, 3)}}
            for m, rep in curve
        ]
        _emit(ctx.obj, json.dumps(payload, indent=2) + "\n")
        return
    header = ("fixations", "top1", "top2", "top3")
    rows = [
        (m, _f(rep.topn[1][0]), _f(rep.topn[2][0]), _f(rep.topn[3][0]))
        for m, rep in curve
    ]
    if fmt == "csv":
        _emit(ctx.obj, _csv_lines(rows, header))
    else:
        _emit(ctx.obj, _table(rows, header))


def main(argv=None):
    try:
        return cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        sys.stderr.write(f"error: {exc.format_message()}\n")
        sys.exit(2)
    except (GazePoolError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        sys.exit(1)


if __name__ == "__main__":
    main()
