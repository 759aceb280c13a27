from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from motionground.interchange import (
    DEPTH_FILE_PATTERN,
    Detection,
    DepthFrame,
    PointTrack,
    QARecord,
    TrackSample,
    VideoMeta,
    validate_bundle,
    write_depth_frame,
    write_detections,
    write_qa,
    write_tracks,
)


def make_depth(
    frame_index: int,
    width: int = 32,
    height: int = 24,
    fill: float = 2.0,
    holes: list[tuple[int, int]] | None = None,
) -> DepthFrame:
    values = np.full((height, width), fill, dtype=np.float32)
    for (row, col) in holes or []:
        values[row, col] = 0.0
    return DepthFrame(frame_index=frame_index, width=width, height=height, values=values)


def linear_track(
    entity: str,
    point_id: int,
    frame_count: int,
    start_xy: tuple[float, float],
    step_xy: tuple[float, float],
    visible_range: tuple[int, int] | None = None,
) -> PointTrack:
    lo, hi = visible_range if visible_range else (0, frame_count - 1)
    samples = tuple(
        TrackSample(
            x=start_xy[0] + step_xy[0] * f,
            y=start_xy[1] + step_xy[1] * f,
            visible=lo <= f <= hi,
        )
        for f in range(frame_count)
    )
    return PointTrack(entity_label=entity, point_id=point_id, samples=samples)


def ball_meta() -> VideoMeta:
    return VideoMeta(video_id="vid_ball", width=32, height=24, fps=15.0, frame_count=30)


def ball_detections(meta: VideoMeta) -> list[Detection]:
    # ball present frames 0..19, cart appears at frame 16 and persists
    dets = [
        Detection(frame_index=f, entity_label="ball", bbox=(1.0 + 0.5 * f, 2.0, 7.0 + 0.5 * f, 8.0), confidence=0.9)
        for f in range(20)
    ]
    dets += [
        Detection(frame_index=f, entity_label="cart", bbox=(20.0, 10.0, 30.0, 20.0), confidence=0.8)
        for f in range(16, meta.frame_count)
    ]
    return dets


def ball_tracks(meta: VideoMeta) -> list[PointTrack]:
    return [
        linear_track("ball", 0, meta.frame_count, (4.0, 5.0), (0.5, 0.0), visible_range=(0, 19)),
        linear_track("ball", 1, meta.frame_count, (5.0, 6.0), (0.5, 0.0), visible_range=(0, 19)),
        linear_track("cart", 0, meta.frame_count, (25.0, 15.0), (0.0, 0.25), visible_range=(16, 29)),
    ]


def ball_depth(meta: VideoMeta) -> dict[int, DepthFrame]:
    return {
        f: make_depth(f, meta.width, meta.height, fill=2.0 + 0.05 * f)
        for f in range(meta.frame_count)
    }


@pytest.fixture
def ball_bundle():
    meta = ball_meta()
    return validate_bundle(meta, ball_detections(meta), ball_tracks(meta), ball_depth(meta))


def qa_record(
    rid: str = "qa_0001",
    video_id: str = "vid_ball",
    question: str = "How does the ball move?",
    ground_truth: str = "The ball rolls to the right at a steady speed.",
    question_type: str = "factual",
    category: str = "MAR",
    polarity: str = "positive",
    entities: tuple[str, ...] = ("ball",),
) -> QARecord:
    return QARecord(
        id=rid, video_id=video_id, question=question, ground_truth=ground_truth,
        question_type=question_type, category=category, polarity=polarity, entities=entities,
    )


def write_fixture_dataset(root: Path, videos: list[str] = ("vid_ball", "vid_cart")) -> Path:
    """Write a complete on-disk dataset (manifest, artifacts, qa) for CLI runs."""
    manifest_videos = []
    for video_id in videos:
        vdir = root / video_id
        vdir.mkdir(parents=True, exist_ok=True)
        meta = VideoMeta(video_id=video_id, width=32, height=24, fps=15.0, frame_count=30)
        write_detections(vdir / "detections.jsonl", ball_detections(meta))
        write_tracks(vdir / "tracks.json", ball_tracks(meta))
        depth_dir = vdir / "depth"
        depth_dir.mkdir(exist_ok=True)
        for f, frame in ball_depth(meta).items():
            write_depth_frame(depth_dir / (DEPTH_FILE_PATTERN % f), frame)
        manifest_videos.append({
            "video_id": video_id,
            "width": meta.width,
            "height": meta.height,
            "fps": meta.fps,
            "frame_count": meta.frame_count,
            "detections": f"{video_id}/detections.jsonl",
            "tracks": f"{video_id}/tracks.json",
            "depth_dir": f"{video_id}/depth",
        })
    manifest_path = root / "dataset.json"
    manifest_path.write_text(json.dumps({"videos": manifest_videos}, indent=2), encoding="utf-8")

    records = []
    for i, video_id in enumerate(videos):
        records.append(qa_record(rid=f"qa_{i}_factual", video_id=video_id))
        records.append(qa_record(
            rid=f"qa_{i}_critical",
            video_id=video_id,
            question="What is abnormal in the scene?",
            ground_truth="The cart appears out of nowhere mid-video.",
            question_type="critical",
            category="PA",
            polarity="negative",
            entities=(),
        ))
    write_qa(root / "qa.jsonl", records)
    return manifest_path


@pytest.fixture
def fixture_dataset(tmp_path):
    return write_fixture_dataset(tmp_path)
