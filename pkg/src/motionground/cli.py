"""Batch front-end: ingest -> segment -> lift -> profile -> serialize -> score.

Items (videos and QA records) fail in isolation: one corrupt artifact marks
its items failed in the error ledger while the rest of the batch completes.
Exit codes: 0 full success, 1 partial or full processing failure, 2 invalid
invocation.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import evaluation, rewards as rewards_mod
from .errors import EngineError
from .geometry import CameraModel
from .interchange import load_bundle, parse_manifest, parse_qa
from .pipeline import (
    ItemResult,
    compute_video_grounding,
    emit_video_outputs,
    write_json_atomic,
    write_text_atomic,
)
from .temporal import SegmentConfig

PARALLEL_ENV = "MOTIONGROUND_PARALLEL"


def _default_parallel() -> int:
    try:
        return max(1, int(os.environ.get(PARALLEL_ENV, "1")))
    except ValueError:
        return 1


def _apply_config(config_path: str | None, values: dict) -> dict:
    """Overlay config-file values onto flag values (config wins)."""
    if not config_path:
        return values
    try:
        overrides = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config file: {exc}")
    if not isinstance(overrides, dict):
        raise click.UsageError("config file must hold a JSON object")
    unknown = set(overrides) - set(values)
    if unknown:
        raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    return values | overrides


def _segment_config(values: dict) -> SegmentConfig:
    return SegmentConfig(
        target_segments=values["target_segments"],
        min_len=values["min_len"],
        max_len=values["max_len"],
        presence_threshold=values["presence_threshold"],
        min_hits=values["min_hits"],
    )


def _camera_for(meta_width: int, meta_height: int, values: dict) -> CameraModel:
    return CameraModel.for_image(
        meta_width, meta_height,
        fx=values["fx"], fy=values["fy"], cx=values["cx"], cy=values["cy"],
    )


@click.group()
def main() -> None:
    """Motion-grounding engine for video perception artifacts."""


@main.command()
@click.option("--manifest", required=True, type=click.Path(), help="dataset.json manifest")
@click.option("--qa", "qa_path", required=True, type=click.Path(), help="qa.jsonl records")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="output directory")
@click.option("--config", "config_path", type=click.Path(), help="JSON config; overrides flags")
@click.option("--target-segments", default=8, show_default=True, type=int)
@click.option("--min-len", default=8, show_default=True, type=int)
@click.option("--max-len", default=None, type=int, help="default: round(2*fps) per video")
@click.option("--presence-threshold", default=0.35, show_default=True, type=float)
@click.option("--min-hits", default=1, show_default=True, type=int)
@click.option("--fx", type=float, default=None, help="focal length x (default max(w,h))")
@click.option("--fy", type=float, default=None, help="focal length y (default max(w,h))")
@click.option("--cx", type=float, default=None, help="principal point x (default w/2)")
@click.option("--cy", type=float, default=None, help="principal point y (default h/2)")
@click.option("--no-grounding", "no_grounding", is_flag=True, help="ablation: empty grounding block")
@click.option("--omit-setup", is_flag=True, help="drop the conversation setup from prompt.txt")
@click.option("--parallel", type=int, default=None, help=f"worker count (default ${PARALLEL_ENV} or 1)")
def profile(**kwargs) -> None:
    """Build grounding profiles and prompts for every (video, QA) item."""
    values = _apply_config(kwargs.pop("config_path"), kwargs)
    seg_config = _segment_config(values)
    out_dir = Path(values["out_dir"])
    parallel = values["parallel"] or _default_parallel()

    try:
        entries = parse_manifest(values["manifest"])
        qa_records = parse_qa(values["qa_path"])
    except EngineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    by_video: dict[str, list] = {}
    for rec in qa_records:
        by_video.setdefault(rec.video_id, []).append(rec)

    known_ids = {e.meta.video_id for e in entries}
    results: list[ItemResult] = []
    for video_id, records in by_video.items():
        if video_id not in known_ids:
            results.extend(
                ItemResult(item=f"{video_id}/{rec.id}", ok=False, error="video not in manifest")
                for rec in records
            )

    def process(entry) -> list[ItemResult]:
        video_id = entry.meta.video_id
        records = by_video.get(video_id, [])
        try:
            bundle = load_bundle(entry)
            camera = _camera_for(entry.meta.width, entry.meta.height, values)
            grounding = compute_video_grounding(bundle, seg_config, camera)
        except EngineError as exc:
            items = [f"{video_id}/{rec.id}" for rec in records] or [video_id]
            return [ItemResult(item=item, ok=False, error=str(exc)) for item in items]
        return emit_video_outputs(
            out_dir,
            grounding,
            records,
            emit_grounding=not values["no_grounding"],
            include_setup=not values["omit_setup"],
        )

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            for batch in pool.map(process, entries):
                results.extend(batch)
    else:
        for entry in entries:
            results.extend(process(entry))

    failures = [r for r in results if not r.ok]
    if failures:
        write_json_atomic(out_dir / "errors.json", [
            {"item": r.item, "error": r.error} for r in failures
        ])
        for r in failures:
            click.echo(f"failed: {r.item}: {r.error}", err=True)
    click.echo(f"{len(results) - len(failures)}/{len(results)} items succeeded")
    sys.exit(1 if failures else 0)


@main.command()
@click.option("--qa", "qa_path", required=True, type=click.Path())
@click.option("--judge-responses", "judge_path", type=click.Path(), help="judge replies to score")
@click.option("--out", "out_dir", type=click.Path(), help="report output directory")
@click.option("--unclear-excluded", is_flag=True, help="drop Unclear from accuracy denominators")
@click.option("--responses", "responses_path", type=click.Path(), help="model answers (request-rendering mode)")
@click.option("--emit-judge-requests", "requests_out", type=click.Path(), help="where to write judge_requests.jsonl")
def score(qa_path, judge_path, out_dir, unclear_excluded, responses_path, requests_out) -> None:
    """Score judge responses into a category report, or render judge requests.

    Scoring mode needs --judge-responses and --out; rendering mode needs
    --responses and --emit-judge-requests.
    """
    rendering = responses_path or requests_out
    scoring = judge_path or out_dir
    if rendering and scoring:
        raise click.UsageError("choose one mode: score judge responses or emit judge requests")
    if rendering and not (responses_path and requests_out):
        raise click.UsageError("request-rendering mode needs both --responses and --emit-judge-requests")
    if not rendering and not (judge_path and out_dir):
        raise click.UsageError("scoring mode needs both --judge-responses and --out")

    try:
        records = parse_qa(qa_path)
        if rendering:
            answers = evaluation.read_response_file(responses_path)
            missing = evaluation.write_judge_requests(requests_out, records, answers)
            for rid in missing:
                click.echo(f"no answer for record {rid}", err=True)
            click.echo(f"wrote {len(records) - len(missing)} judge requests to {requests_out}")
            sys.exit(1 if missing else 0)

        responses = evaluation.read_response_file(judge_path)
    except EngineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    pairs, missing = evaluation.verdicts_for_records(records, responses)
    report = evaluation.aggregate(pairs, unclear_excluded=unclear_excluded)
    out = Path(out_dir)
    write_json_atomic(out / "report.json", {
        **report.to_dict(),
        "stats": evaluation.dataset_stats(records),
        "missing_response_ids": missing,
    })
    write_text_atomic(out / "report.md", evaluation.render_report_md(report))
    for rid in missing:
        click.echo(f"missing response for {rid}: counted Unclear", err=True)
    click.echo(f"overall accuracy: {report.overall.accuracy:.2f}")
    sys.exit(0)


@main.command()
@click.option("--qa", "qa_path", required=True, type=click.Path())
@click.option("--out", "out_path", default="stats.json", show_default=True, type=click.Path())
def stats(qa_path, out_path) -> None:
    """Dataset composition: counts and percentages over an explicit base."""
    try:
        records = parse_qa(qa_path)
    except EngineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    table = evaluation.dataset_stats(records)
    click.echo(evaluation.render_stats_text(table), nl=False)
    write_json_atomic(Path(out_path), table)
    sys.exit(0)


@main.command()
@click.option("--rollouts", "rollouts_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--qa", "qa_path", type=click.Path(), help="QA file providing reference answers")
@click.option("--w-correct", default=1.0, show_default=True, type=float)
@click.option("--w-format", default=0.5, show_default=True, type=float)
@click.option("--w-rouge", default=0.5, show_default=True, type=float)
@click.option("--alpha-temporal", default=0.3, show_default=True, type=float)
@click.option("--epsilon", default=1e-6, show_default=True, type=float)
def rewards(rollouts_path, out_path, qa_path, w_correct, w_format, w_rouge, alpha_temporal, epsilon) -> None:
    """Score rollout groups and emit per-rollout advantages."""
    weights = rewards_mod.RewardWeights(
        w_correct=w_correct, w_format=w_format, w_rouge=w_rouge,
        alpha_temporal=alpha_temporal, epsilon=epsilon,
    )
    path = Path(rollouts_path)
    if not path.is_file():
        click.echo(f"error: rollouts file not found: {path}", err=True)
        sys.exit(1)

    parsed: list[tuple[str, rewards_mod.Rollout]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                parsed.append((str(obj["prompt_id"]), rewards_mod.Rollout(
                    text=str(obj["text"]),
                    correctness=float(obj["correctness"]),
                    ordered_frames=bool(obj.get("ordered", True)),
                )))
            except (KeyError, TypeError, ValueError) as exc:
                click.echo(f"error: rollouts line {lineno}: {exc}", err=True)
                sys.exit(1)

    refs: dict[str, str] = {}
    if qa_path:
        try:
            refs = {rec.id: rec.ground_truth for rec in parse_qa(qa_path)}
        except EngineError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    rows = rewards_mod.process_rollout_groups(parsed, weights, refs)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    click.echo(f"wrote {len(rows)} advantage rows to {out}")
    sys.exit(0)


@main.command()
@click.option("--manifest", required=True, type=click.Path())
def validate(manifest) -> None:
    """Cross-validate every video's artifacts against the manifest."""
    try:
        entries = parse_manifest(manifest)
    except EngineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    failed = 0
    for entry in entries:
        try:
            bundle = load_bundle(entry)
        except EngineError as exc:
            failed += 1
            click.echo(f"{entry.meta.video_id}: INVALID", err=True)
            for line in str(exc).split("; "):
                click.echo(f"  {line}", err=True)
            continue
        click.echo(
            f"{entry.meta.video_id}: ok "
            f"({len(bundle.detections)} detections, {len(bundle.tracks)} tracks, "
            f"{len(bundle.depth_frames)} depth frames, {len(bundle.entities)} entities)"
        )
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
