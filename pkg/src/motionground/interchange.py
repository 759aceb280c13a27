"""File formats through which perception adapters feed the engine.

Covers the dataset manifest, per-video detection/track/depth artifacts, the
QA record format of the benchmark, and the cross-checked immutable bundle
the rest of the engine consumes. Parsers are total over their error types:
malformed input raises a structured error from :mod:`motionground.errors`,
never a bare ``KeyError`` or ``struct.error``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BundleValidationError,
    DepthFormatError,
    DetectionFormatError,
    ManifestError,
    QAFormatError,
    TrackFormatError,
)

QUESTION_TYPES = ("factual", "critical")
CATEGORIES = ("SU", "TU", "MAR", "PC", "PA")
POLARITIES = ("positive", "negative")

DEPTH_MAGIC = b"MGD1"
DEPTH_FILE_PATTERN = "depth_%06d.bin"
_DEPTH_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, slots=True)
class VideoMeta:
    video_id: str
    width: int
    height: int
    fps: float
    frame_count: int

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ManifestError("video_id must be non-empty", field="video_id")
        for name in ("width", "height", "frame_count"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ManifestError(f"must be a positive integer, got {value!r}", field=name)
        if not (isinstance(self.fps, (int, float)) and math.isfinite(self.fps) and self.fps > 0):
            raise ManifestError(f"must be a positive real, got {self.fps!r}", field="fps")


@dataclass(frozen=True, slots=True)
class Detection:
    frame_index: int
    entity_label: str
    bbox: tuple[float, float, float, float]
    confidence: float


@dataclass(frozen=True, slots=True)
class TrackSample:
    x: float
    y: float
    visible: bool


@dataclass(frozen=True, slots=True)
class PointTrack:
    entity_label: str
    point_id: int
    samples: tuple[TrackSample, ...]


@dataclass(frozen=True)
class DepthFrame:
    """Row-major grid of model-relative scalar depth.

    Values <= 0 or non-finite mark invalid texels (holes); they are carried
    through decoding untouched and only interpreted at sampling time.
    """

    frame_index: int
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.values, dtype=np.float32).reshape(self.height, self.width)
        grid.flags.writeable = False
        object.__setattr__(self, "values", grid)


@dataclass(frozen=True, slots=True)
class QARecord:
    id: str
    video_id: str
    question: str
    ground_truth: str
    question_type: str
    category: str
    polarity: str
    entities: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class ManifestEntry:
    """One video's metadata plus the locations of its perception artifacts."""

    meta: VideoMeta
    detections_path: Path
    tracks_path: Path
    depth_dir: Path


@dataclass(frozen=True, slots=True)
class PerceptionBundle:
    """Validated, immutable per-video perception inputs.

    Construct via :func:`validate_bundle`; the constructor itself performs no
    checks so tests can build deliberately broken bundles.
    """

    meta: VideoMeta
    detections: tuple[Detection, ...]
    tracks: tuple[PointTrack, ...]
    depth_frames: Mapping[int, DepthFrame]

    @property
    def entities(self) -> tuple[str, ...]:
        """Detected entity labels, ordered by first detection then label."""
        first_seen: dict[str, int] = {}
        for det in self.detections:
            prev = first_seen.get(det.entity_label)
            if prev is None or det.frame_index < prev:
                first_seen[det.entity_label] = det.frame_index
        return tuple(sorted(first_seen, key=lambda lbl: (first_seen[lbl], lbl)))

    def tracks_for(self, entity_label: str) -> tuple[PointTrack, ...]:
        return tuple(t for t in self.tracks if t.entity_label == entity_label)


# -- manifest ---------------------------------------------------------------


def _require(obj: Mapping, key: str, path: str):
    if key not in obj:
        raise ManifestError("missing required field", field=f"{path}.{key}" if path else key)
    return obj[key]


def parse_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse ``dataset.json`` into per-video entries.

    Artifact paths are recorded (resolved relative to the manifest's
    directory) but not read; loading happens later, per video.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"malformed JSON: {exc}") from exc

    if not isinstance(doc, dict):
        raise ManifestError("top-level document must be an object")
    videos = _require(doc, "videos", "")
    if not isinstance(videos, list):
        raise ManifestError("must be an array", field="videos")

    base = path.parent
    entries: list[ManifestEntry] = []
    for i, video in enumerate(videos):
        vpath = f"videos[{i}]"
        if not isinstance(video, dict):
            raise ManifestError("must be an object", field=vpath)
        raw = {key: _require(video, key, vpath) for key in (
            "video_id", "width", "height", "fps", "frame_count",
            "detections", "tracks", "depth_dir",
        )}
        if not isinstance(raw["video_id"], str) or not raw["video_id"]:
            raise ManifestError("must be a non-empty string", field=f"{vpath}.video_id")
        for key in ("width", "height", "frame_count"):
            if not isinstance(raw[key], int) or isinstance(raw[key], bool) or raw[key] <= 0:
                raise ManifestError(f"must be a positive integer, got {raw[key]!r}", field=f"{vpath}.{key}")
        fps = raw["fps"]
        if isinstance(fps, bool) or not isinstance(fps, (int, float)) or not math.isfinite(fps) or fps <= 0:
            raise ManifestError(f"must be a positive real, got {fps!r}", field=f"{vpath}.fps")
        for key in ("detections", "tracks", "depth_dir"):
            if not isinstance(raw[key], str) or not raw[key]:
                raise ManifestError("must be a non-empty path string", field=f"{vpath}.{key}")
        meta = VideoMeta(
            video_id=raw["video_id"],
            width=raw["width"],
            height=raw["height"],
            fps=float(fps),
            frame_count=raw["frame_count"],
        )
        entries.append(ManifestEntry(
            meta=meta,
            detections_path=base / raw["detections"],
            tracks_path=base / raw["tracks"],
            depth_dir=base / raw["depth_dir"],
        ))
    return entries


# -- binary depth (MGD1) ----------------------------------------------------


def parse_depth_frame(buf: bytes) -> DepthFrame:
    """Decode one MGD1 buffer: magic, u32 width/height/frame, f32 grid (LE)."""
    if len(buf) < _DEPTH_HEADER.size:
        raise DepthFormatError(f"buffer too short for header: {len(buf)} bytes")
    magic, width, height, frame_index = _DEPTH_HEADER.unpack_from(buf)
    if magic != DEPTH_MAGIC:
        raise DepthFormatError(f"bad magic {magic!r}, expected {DEPTH_MAGIC!r}")
    if width == 0 or height == 0:
        raise DepthFormatError(f"zero dimension: {width}x{height}")
    expected = _DEPTH_HEADER.size + 4 * width * height
    if len(buf) != expected:
        raise DepthFormatError(
            f"payload size mismatch: expected {expected} bytes for {width}x{height}, got {len(buf)}"
        )
    values = np.frombuffer(buf, dtype="<f4", offset=_DEPTH_HEADER.size).reshape(height, width)
    return DepthFrame(frame_index=frame_index, width=width, height=height, values=values.copy())


def encode_depth_frame(frame: DepthFrame) -> bytes:
    """Inverse of :func:`parse_depth_frame`; bit-exact, NaN payloads included."""
    header = _DEPTH_HEADER.pack(DEPTH_MAGIC, frame.width, frame.height, frame.frame_index)
    return header + np.ascontiguousarray(frame.values, dtype="<f4").tobytes()


def read_depth_frame(path: str | Path) -> DepthFrame:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise DepthFormatError(f"cannot read {path}: {exc}") from exc
    return parse_depth_frame(buf)


def write_depth_frame(path: str | Path, frame: DepthFrame) -> None:
    Path(path).write_bytes(encode_depth_frame(frame))


def load_depth_dir(depth_dir: str | Path, frame_count: int) -> dict[int, DepthFrame]:
    """Read ``depth_%06d.bin`` files for frames [0, frame_count).

    Missing files are allowed (depth holes at whole-frame granularity);
    present files must decode and carry the frame index they are named for.
    """
    depth_dir = Path(depth_dir)
    frames: dict[int, DepthFrame] = {}
    for idx in range(frame_count):
        path = depth_dir / (DEPTH_FILE_PATTERN % idx)
        if not path.is_file():
            continue
        frame = read_depth_frame(path)
        if frame.frame_index != idx:
            raise DepthFormatError(
                f"{path.name}: header frame_index {frame.frame_index} does not match file name"
            )
        frames[idx] = frame
    return frames


# -- detections -------------------------------------------------------------


def parse_detections(path: str | Path) -> list[Detection]:
    """Parse ``detections.jsonl``; one object per line, blank lines ignored."""
    path = Path(path)
    if not path.is_file():
        raise DetectionFormatError(f"detections file not found: {path}")
    out: list[Detection] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DetectionFormatError(f"malformed JSON: {exc}", line=lineno) from exc
            try:
                bbox = obj["bbox"]
                if not (isinstance(bbox, list) and len(bbox) == 4):
                    raise DetectionFormatError("bbox must be a 4-element array", line=lineno)
                out.append(Detection(
                    frame_index=int(obj["frame"]),
                    entity_label=str(obj["entity"]),
                    bbox=tuple(float(v) for v in bbox),
                    confidence=float(obj["score"]),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise DetectionFormatError(f"bad record: {exc}", line=lineno) from exc
    return out


def write_detections(path: str | Path, detections: Iterable[Detection]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for det in detections:
            fh.write(json.dumps({
                "frame": det.frame_index,
                "entity": det.entity_label,
                "bbox": list(det.bbox),
                "score": det.confidence,
            }) + "\n")


# -- tracks -----------------------------------------------------------------


def parse_tracks(path: str | Path) -> list[PointTrack]:
    """Parse ``tracks.json``: an array of per-entity dense point tracks.

    Point ids are assigned 0-based per entity, in file order.
    """
    path = Path(path)
    if not path.is_file():
        raise TrackFormatError(f"tracks file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TrackFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise TrackFormatError("top-level document must be an array")

    tracks: list[PointTrack] = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or "entity_label" not in entry or "points" not in entry:
            raise TrackFormatError(f"entry {i}: expected object with entity_label and points")
        label = entry["entity_label"]
        points = entry["points"]
        if not isinstance(label, str) or not label:
            raise TrackFormatError(f"entry {i}: entity_label must be a non-empty string")
        if not isinstance(points, list):
            raise TrackFormatError(f"entry {i}: points must be an array")
        for pid, samples in enumerate(points):
            try:
                parsed = tuple(
                    TrackSample(x=float(s[0]), y=float(s[1]), visible=bool(int(s[2])))
                    for s in samples
                )
            except (TypeError, ValueError, IndexError) as exc:
                raise TrackFormatError(f"entry {i} point {pid}: bad sample: {exc}") from exc
            tracks.append(PointTrack(entity_label=label, point_id=pid, samples=parsed))
    return tracks


def write_tracks(path: str | Path, tracks: Iterable[PointTrack]) -> None:
    by_entity: dict[str, list[PointTrack]] = {}
    for track in tracks:
        by_entity.setdefault(track.entity_label, []).append(track)
    doc = [
        {
            "entity_label": label,
            "points": [
                [[s.x, s.y, 1 if s.visible else 0] for s in t.samples]
                for t in sorted(group, key=lambda t: t.point_id)
            ],
        }
        for label, group in by_entity.items()
    ]
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


# -- QA records ---------------------------------------------------------------


def _validate_qa_obj(obj: Mapping, lineno: int | None) -> QARecord:
    for key in ("id", "video_id", "question", "ground_truth", "question_type", "category", "polarity"):
        if key not in obj or not isinstance(obj[key], str) or not obj[key]:
            raise QAFormatError(f"field {key!r} missing or not a non-empty string", line=lineno)
    if obj["question_type"] not in QUESTION_TYPES:
        raise QAFormatError(f"unknown question_type {obj['question_type']!r}", line=lineno)
    if obj["category"] not in CATEGORIES:
        raise QAFormatError(f"unknown category {obj['category']!r}", line=lineno)
    if obj["polarity"] not in POLARITIES:
        raise QAFormatError(f"unknown polarity {obj['polarity']!r}", line=lineno)
    entities = obj.get("entities", [])
    if not isinstance(entities, list) or not all(isinstance(e, str) and e for e in entities):
        raise QAFormatError("entities must be an array of non-empty strings", line=lineno)
    if obj["question_type"] == "factual" and not entities:
        raise QAFormatError("factual records require a non-empty entity list", line=lineno)
    return QARecord(
        id=obj["id"],
        video_id=obj["video_id"],
        question=obj["question"],
        ground_truth=obj["ground_truth"],
        question_type=obj["question_type"],
        category=obj["category"],
        polarity=obj["polarity"],
        entities=tuple(entities),
    )


def parse_qa(path: str | Path) -> list[QARecord]:
    """Parse ``qa.jsonl``; errors carry the 1-based line number."""
    path = Path(path)
    if not path.is_file():
        raise QAFormatError(f"QA file not found: {path}")
    records: list[QARecord] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise QAFormatError(f"malformed JSON: {exc}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise QAFormatError("record must be an object", line=lineno)
            records.append(_validate_qa_obj(obj, lineno))
    return records


def write_qa(path: str | Path, records: Iterable[QARecord]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps({
                "id": rec.id,
                "video_id": rec.video_id,
                "question": rec.question,
                "ground_truth": rec.ground_truth,
                "question_type": rec.question_type,
                "category": rec.category,
                "polarity": rec.polarity,
                "entities": list(rec.entities),
            }, ensure_ascii=False) + "\n")


# -- cross-validation ---------------------------------------------------------


def _clamp_track(track: PointTrack, width: int, height: int) -> PointTrack:
    """Clamp visible out-of-bounds samples into the image and mark them invisible."""
    changed = False
    samples = []
    for s in track.samples:
        if s.visible and not (0.0 <= s.x <= width and 0.0 <= s.y <= height):
            samples.append(TrackSample(
                x=min(max(s.x, 0.0), float(width)),
                y=min(max(s.y, 0.0), float(height)),
                visible=False,
            ))
            changed = True
        else:
            samples.append(s)
    return replace(track, samples=tuple(samples)) if changed else track


def validate_bundle(
    meta: VideoMeta,
    detections: Sequence[Detection],
    tracks: Sequence[PointTrack],
    depth_frames: Mapping[int, DepthFrame],
) -> PerceptionBundle:
    """Cross-check all per-type invariants and return an immutable bundle.

    Every violation is collected into one :class:`BundleValidationError`
    rather than failing at the first. Visible track samples outside the
    image are not violations: they are clamped and flagged invisible.
    """
    violations: list[str] = []

    for i, det in enumerate(detections):
        x1, y1, x2, y2 = det.bbox
        if not (0 <= det.frame_index < meta.frame_count):
            violations.append(
                f"detection[{i}] ({det.entity_label}): frame_index {det.frame_index} "
                f"outside [0, {meta.frame_count})"
            )
        if not (0 <= x1 < x2 <= meta.width and 0 <= y1 < y2 <= meta.height):
            violations.append(
                f"detection[{i}] ({det.entity_label}, frame {det.frame_index}): "
                f"bbox {det.bbox} outside {meta.width}x{meta.height}"
            )
        if not (0.0 <= det.confidence <= 1.0):
            violations.append(
                f"detection[{i}] ({det.entity_label}, frame {det.frame_index}): "
                f"confidence {det.confidence} outside [0, 1]"
            )
        if not det.entity_label:
            violations.append(f"detection[{i}]: empty entity label")

    detected_labels = {d.entity_label for d in detections}
    normalized_tracks = []
    for track in tracks:
        tid = f"track ({track.entity_label}, point {track.point_id})"
        if len(track.samples) != meta.frame_count:
            violations.append(
                f"{tid}: {len(track.samples)} samples, expected frame_count {meta.frame_count}"
            )
        if track.entity_label not in detected_labels:
            violations.append(f"{tid}: entity has no detections")
        normalized_tracks.append(_clamp_track(track, meta.width, meta.height))

    seen_depth: set[int] = set()
    for idx, frame in sorted(depth_frames.items()):
        if idx != frame.frame_index:
            violations.append(f"depth frame keyed {idx} carries frame_index {frame.frame_index}")
        if idx in seen_depth:
            violations.append(f"duplicate depth frame {idx}")
        seen_depth.add(idx)
        if not (0 <= idx < meta.frame_count):
            violations.append(f"depth frame {idx}: index outside [0, {meta.frame_count})")
        if (frame.width, frame.height) != (meta.width, meta.height):
            violations.append(
                f"depth frame {idx}: {frame.width}x{frame.height} does not match "
                f"video {meta.width}x{meta.height}"
            )

    if violations:
        raise BundleValidationError(violations)

    return PerceptionBundle(
        meta=meta,
        detections=tuple(detections),
        tracks=tuple(normalized_tracks),
        depth_frames=dict(depth_frames),
    )


def load_bundle(entry: ManifestEntry) -> PerceptionBundle:
    """Read and cross-validate all artifacts referenced by a manifest entry."""
    detections = parse_detections(entry.detections_path)
    tracks = parse_tracks(entry.tracks_path)
    depth = load_depth_dir(entry.depth_dir, entry.meta.frame_count)
    return validate_bundle(entry.meta, detections, tracks, depth)
