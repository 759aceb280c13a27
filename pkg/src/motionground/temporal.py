"""Duration-adaptive temporal segmentation and per-entity presence profiles.

A video is cut into near-uniform frame chunks whose nominal length adapts to
the video's duration; per segment, an entity is present when enough
sufficiently-confident detections land inside it. Presence flips away from
the video boundaries are surfaced as sudden appearance/disappearance
artifacts, typical of generated video.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .interchange import Detection, PerceptionBundle


@dataclass(frozen=True, slots=True)
class SegmentConfig:
    """Free parameters of the segmentation and presence scheme.

    ``max_len`` defaults to ``round(2 * fps)`` of the video being planned
    (leave ``None``); it is never allowed below ``min_len``.
    """

    target_segments: int = 8
    min_len: int = 8
    max_len: int | None = None
    presence_threshold: float = 0.35
    min_hits: int = 1

    def __post_init__(self) -> None:
        if self.target_segments < 1:
            raise ValueError("target_segments must be >= 1")
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")
        if self.max_len is not None and self.max_len < self.min_len:
            raise ValueError("max_len must be >= min_len")
        if not (0.0 <= self.presence_threshold <= 1.0):
            raise ValueError("presence_threshold must be in [0, 1]")
        if self.min_hits < 1:
            raise ValueError("min_hits must be >= 1")

    def effective_max_len(self, fps: float) -> int:
        if self.max_len is not None:
            return self.max_len
        return max(self.min_len, round(2.0 * fps))


@dataclass(frozen=True, slots=True)
class SegmentPlan:
    """Inclusive, 0-based frame ranges that exactly partition the video."""

    segments: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def to_dict(self) -> dict:
        return {"segments": [list(seg) for seg in self.segments]}


@dataclass(frozen=True, slots=True)
class SegmentPresence:
    present: bool
    hit_count: int
    best_bbox: tuple[float, float, float, float] | None


@dataclass(frozen=True, slots=True)
class PresenceProfile:
    entity_label: str
    segments: tuple[SegmentPresence, ...]

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, index: int) -> SegmentPresence:
        return self.segments[index]

    @property
    def flags(self) -> tuple[bool, ...]:
        return tuple(s.present for s in self.segments)

    def to_dict(self) -> dict:
        return {
            "entity_label": self.entity_label,
            "segments": [
                {
                    "present": s.present,
                    "hit_count": s.hit_count,
                    "best_bbox": list(s.best_bbox) if s.best_bbox else None,
                }
                for s in self.segments
            ],
        }


@dataclass(frozen=True, slots=True)
class TemporalArtifact:
    entity_label: str
    kind: str  # "sudden_appearance" | "sudden_disappearance"
    segment_index: int

    def to_dict(self) -> dict:
        return {
            "entity": self.entity_label,
            "kind": self.kind,
            "segment_index": self.segment_index,
        }


def plan_segments(frame_count: int, fps: float, config: SegmentConfig | None = None) -> SegmentPlan:
    """Chunk [0, frame_count) into segments of adaptive nominal length.

    Nominal length ``L = clamp(ceil(frame_count / target_segments), min_len,
    max_len)``; all segments have length L except the final one, which takes
    whatever remains (at least one frame). A video no longer than
    ``min_len`` becomes a single segment.
    """
    if frame_count < 1:
        raise ValueError(f"frame_count must be >= 1, got {frame_count}")
    config = config or SegmentConfig()
    nominal = math.ceil(frame_count / config.target_segments)
    length = min(max(nominal, config.min_len), config.effective_max_len(fps))
    segments = tuple(
        (start, min(start + length, frame_count) - 1)
        for start in range(0, frame_count, length)
    )
    return SegmentPlan(segments=segments)


def _better(a: Detection, b: Detection) -> Detection:
    """Higher confidence wins; ties go to the earlier frame, then lower x1."""
    ka = (-a.confidence, a.frame_index, a.bbox[0])
    kb = (-b.confidence, b.frame_index, b.bbox[0])
    return a if ka <= kb else b


def build_presence(
    bundle: PerceptionBundle,
    plan: SegmentPlan,
    config: SegmentConfig,
    entity_label: str,
) -> PresenceProfile:
    """Per-segment presence for one entity.

    A segment is present when at least ``min_hits`` detections with
    confidence >= ``presence_threshold`` fall inside it. Unknown entities
    yield an all-absent profile rather than an error.
    """
    detections = [d for d in bundle.detections if d.entity_label == entity_label]
    per_segment: list[SegmentPresence] = []
    for start, end in plan:
        hits = 0
        best: Detection | None = None
        for det in detections:
            if not (start <= det.frame_index <= end):
                continue
            if det.confidence >= config.presence_threshold:
                hits += 1
            best = det if best is None else _better(best, det)
        per_segment.append(SegmentPresence(
            present=hits >= config.min_hits,
            hit_count=hits,
            best_bbox=best.bbox if best is not None else None,
        ))
    return PresenceProfile(entity_label=entity_label, segments=tuple(per_segment))


def detect_artifacts(profile: PresenceProfile) -> list[TemporalArtifact]:
    """Presence flips away from the video boundaries.

    Appearing in the very first segment and disappearing into the very last
    one are normal; every other transition is reported at the segment where
    the new state begins.
    """
    artifacts: list[TemporalArtifact] = []
    flags = profile.flags
    last = len(flags) - 1
    for i in range(1, len(flags)):
        if flags[i] and not flags[i - 1]:
            artifacts.append(TemporalArtifact(profile.entity_label, "sudden_appearance", i))
        elif flags[i - 1] and not flags[i] and i < last:
            artifacts.append(TemporalArtifact(profile.entity_label, "sudden_disappearance", i))
    return artifacts
