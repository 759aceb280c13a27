"""End-to-end per-video flow: ingest, segment, lift, profile, serialize.

Everything here is pure computation over validated bundles plus atomic
file emission; batch orchestration (work pool, error ledger, exit codes)
lives in the CLI.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .geometry import CameraModel, MotionAttributes, lift_track, segment_motion
from .interchange import ManifestEntry, PerceptionBundle, QARecord, load_bundle
from .serialize import GroundingProfile, PromptBundle, build_grounding_profile, render_entity_block, render_prompt
from .temporal import (
    PresenceProfile,
    SegmentConfig,
    SegmentPlan,
    TemporalArtifact,
    build_presence,
    detect_artifacts,
    plan_segments,
)


@dataclass(frozen=True)
class VideoGrounding:
    """All per-video derived state needed to serve any QA record."""

    bundle: PerceptionBundle
    plan: SegmentPlan
    presence: dict[str, PresenceProfile]
    artifacts: tuple[TemporalArtifact, ...]
    slots: dict[str, tuple[MotionAttributes | None, ...]]

    def entity_slots(self, label: str) -> tuple[MotionAttributes | None, ...]:
        """Slots for any requested label; unknown entities are all-absent."""
        return self.slots.get(label, (None,) * len(self.plan))


def compute_video_grounding(
    bundle: PerceptionBundle,
    config: SegmentConfig,
    camera: CameraModel,
) -> VideoGrounding:
    plan = plan_segments(bundle.meta.frame_count, bundle.meta.fps, config)
    presence: dict[str, PresenceProfile] = {}
    slots: dict[str, tuple[MotionAttributes | None, ...]] = {}
    artifacts: list[TemporalArtifact] = []

    for label in bundle.entities:
        profile = build_presence(bundle, plan, config, label)
        presence[label] = profile
        artifacts.extend(detect_artifacts(profile))
        trajectories = [
            lift_track(track, bundle.depth_frames, camera)
            for track in bundle.tracks_for(label)
        ]
        slots[label] = tuple(
            segment_motion(trajectories, seg, profile[j], label, j)
            for j, seg in enumerate(plan)
        )

    return VideoGrounding(
        bundle=bundle,
        plan=plan,
        presence=presence,
        artifacts=tuple(artifacts),
        slots=slots,
    )


def grounding_for_record(grounding: VideoGrounding, qa: QARecord) -> GroundingProfile:
    """Profile over the record's entities; records without explicit entity
    annotations (critical-thinking style) get every detected entity."""
    labels = qa.entities if qa.entities else grounding.bundle.entities
    entries = [(label, grounding.entity_slots(label)) for label in dict.fromkeys(labels)]
    return build_grounding_profile(grounding.bundle.meta.video_id, entries)


def prompt_for_record(
    grounding: VideoGrounding,
    qa: QARecord,
    emit_grounding: bool = True,
) -> tuple[GroundingProfile, PromptBundle]:
    profile = grounding_for_record(grounding, qa)
    text = render_entity_block(profile) if emit_grounding else ""
    return profile, render_prompt(qa, text)


def load_video_grounding(
    entry: ManifestEntry,
    config: SegmentConfig,
    camera: CameraModel | None = None,
) -> VideoGrounding:
    bundle = load_bundle(entry)
    cam = camera or CameraModel.for_image(entry.meta.width, entry.meta.height)
    return compute_video_grounding(bundle, config, cam)


# -- atomic emission -----------------------------------------------------------


def write_text_atomic(path: Path, text: str) -> None:
    """Write-then-rename so concurrent runs never expose partial files."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    with tmp.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json_atomic(path: Path, payload) -> None:
    write_text_atomic(path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


@dataclass
class ItemResult:
    item: str
    ok: bool
    error: str | None = None
    outputs: list[str] = field(default_factory=list)


def emit_video_outputs(
    out_dir: Path,
    grounding: VideoGrounding,
    qa_records: Sequence[QARecord],
    emit_grounding: bool = True,
    include_setup: bool = True,
) -> list[ItemResult]:
    """Write per-video diagnostics and one prompt/grounding pair per record.

    Outputs land under ``<out>/<video_id>/`` and ``<out>/<video_id>/<qa_id>/``;
    every write is atomic, so reruns and parallel runs are byte-idempotent.
    """
    video_id = grounding.bundle.meta.video_id
    video_dir = out_dir / video_id
    results: list[ItemResult] = []

    write_json_atomic(video_dir / "segments.json", {
        "video_id": video_id,
        **grounding.plan.to_dict(),
    })
    write_json_atomic(video_dir / "artifacts.json", {
        "video_id": video_id,
        "artifacts": [a.to_dict() for a in grounding.artifacts],
    })
    write_json_atomic(video_dir / "profile.json", {
        "video_id": video_id,
        **grounding.plan.to_dict(),
        "entities": [grounding.presence[label].to_dict() for label in grounding.bundle.entities],
    })

    for qa in qa_records:
        item = f"{video_id}/{qa.id}"
        try:
            profile, bundle = prompt_for_record(grounding, qa, emit_grounding=emit_grounding)
            qa_dir = video_dir / qa.id
            write_text_atomic(qa_dir / "prompt.txt", bundle.flatten(include_setup=include_setup))
            write_json_atomic(qa_dir / "grounding.json", profile.to_dict())
            results.append(ItemResult(item=item, ok=True, outputs=[
                str(qa_dir / "prompt.txt"), str(qa_dir / "grounding.json"),
            ]))
        except Exception as exc:  # noqa: BLE001 - per-item fault isolation
            results.append(ItemResult(item=item, ok=False, error=str(exc)))
    return results
