"""Lifting 2D point tracks into depth-relative 3D and aggregating motion.

A pinhole camera with configurable intrinsics maps (pixel, depth) pairs to
3D points whose z equals the sampled depth. Per entity and segment, tracked
points with at least two valid 3D samples contribute their first/last
positions and displacement; means over contributing points form the
segment's motion attributes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import GeometryError
from .interchange import DepthFrame, PointTrack
from .temporal import SegmentPresence


@dataclass(frozen=True, slots=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @classmethod
    def for_image(
        cls,
        width: int,
        height: int,
        fx: float | None = None,
        fy: float | None = None,
        cx: float | None = None,
        cy: float | None = None,
    ) -> "CameraModel":
        """Canonical pinhole defaults: f = max(w, h), principal point centered."""
        f = float(max(width, height))
        cam = cls(
            fx=fx if fx is not None else f,
            fy=fy if fy is not None else f,
            cx=cx if cx is not None else width / 2.0,
            cy=cy if cy is not None else height / 2.0,
        )
        if not (0 <= cam.cx <= width and 0 <= cam.cy <= height):
            raise GeometryError(f"principal point ({cam.cx}, {cam.cy}) outside {width}x{height} image")
        return cam


@dataclass(frozen=True, slots=True)
class Point3:
    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True, slots=True)
class TrajectorySample:
    frame_index: int
    point: Point3 | None
    valid: bool


@dataclass(frozen=True, slots=True)
class Trajectory3D:
    point_id: int
    samples: tuple[TrajectorySample, ...]

    def to_dict(self) -> dict:
        """Debug dump; not part of any interchange contract."""
        return {
            "point_id": self.point_id,
            "samples": [
                {
                    "frame": s.frame_index,
                    "point": list(s.point.as_tuple()) if s.point else None,
                    "valid": s.valid,
                }
                for s in self.samples
            ],
        }


@dataclass(frozen=True, slots=True)
class MotionAttributes:
    """Per-entity, per-segment aggregate over contributing tracked points."""

    entity_label: str
    segment_index: int
    first_position: Point3
    last_position: Point3
    motion_vector: Point3
    bbox: tuple[float, float, float, float]
    first_frame: int
    last_frame: int

    def to_dict(self) -> dict:
        return {
            "entity": self.entity_label,
            "segment_index": self.segment_index,
            "first_position": list(self.first_position.as_tuple()),
            "motion_vector": list(self.motion_vector.as_tuple()),
            "last_position": list(self.last_position.as_tuple()),
            "bbox": list(self.bbox),
            "first_frame": self.first_frame,
            "last_frame": self.last_frame,
        }


def backproject(u: float, v: float, depth: float, cam: CameraModel) -> Point3:
    """Inverse pinhole map: pixel plus depth to a 3D point with z = depth."""
    if not (math.isfinite(depth) and depth > 0):
        raise GeometryError(f"depth must be finite and positive, got {depth}")
    return Point3(
        x=depth * (u - cam.cx) / cam.fx,
        y=depth * (v - cam.cy) / cam.fy,
        z=depth,
    )


def sample_depth(frame: DepthFrame, u: float, v: float) -> float | None:
    """Bilinear depth lookup at texel coordinates, or None over a hole.

    Texel centers sit at integer coordinates; queries are clamped to the
    grid rectangle. Only texels with nonzero interpolation weight
    contribute, and any invalid contributor (<= 0 or non-finite) makes the
    whole sample invalid.
    """
    if not (math.isfinite(u) and math.isfinite(v)):
        return None
    u = min(max(u, 0.0), frame.width - 1.0)
    v = min(max(v, 0.0), frame.height - 1.0)
    u0 = int(u)
    v0 = int(v)
    u1 = min(u0 + 1, frame.width - 1)
    v1 = min(v0 + 1, frame.height - 1)
    du = u - u0
    dv = v - v0

    values = frame.values
    total = 0.0
    for (vi, ui, w) in (
        (v0, u0, (1.0 - du) * (1.0 - dv)),
        (v0, u1, du * (1.0 - dv)),
        (v1, u0, (1.0 - du) * dv),
        (v1, u1, du * dv),
    ):
        if w == 0.0:
            continue
        texel = float(values[vi, ui])
        if not (math.isfinite(texel) and texel > 0.0):
            return None
        total += w * texel
    return total


def lift_track(
    track: PointTrack,
    depth_frames: Mapping[int, DepthFrame],
    cam: CameraModel,
) -> Trajectory3D:
    """Per-frame 3D lift of one dense track.

    A sample is valid only when the source point is visible and the depth
    under it is valid; missing depth frames invalidate, they do not error.
    All provided depth frames must share one grid size.
    """
    dims = {(f.width, f.height) for f in depth_frames.values()}
    if len(dims) > 1:
        raise GeometryError(f"depth frames disagree on dimensions: {sorted(dims)}")
    if dims:
        width, height = next(iter(dims))
        for s in track.samples:
            if s.visible and not (0.0 <= s.x <= width and 0.0 <= s.y <= height):
                raise GeometryError(
                    f"track point {track.point_id}: visible sample ({s.x}, {s.y}) "
                    f"outside {width}x{height} depth grid"
                )

    samples: list[TrajectorySample] = []
    for frame_index, s in enumerate(track.samples):
        point: Point3 | None = None
        if s.visible:
            depth_frame = depth_frames.get(frame_index)
            if depth_frame is not None:
                d = sample_depth(depth_frame, s.x, s.y)
                if d is not None:
                    point = backproject(s.x, s.y, d, cam)
        samples.append(TrajectorySample(frame_index=frame_index, point=point, valid=point is not None))
    return Trajectory3D(point_id=track.point_id, samples=tuple(samples))


def segment_motion(
    trajectories: Sequence[Trajectory3D],
    segment: tuple[int, int],
    presence: SegmentPresence,
    entity_label: str,
    segment_index: int,
) -> MotionAttributes | None:
    """Aggregate one entity's trajectories over one segment.

    Absent presence, or no point with >= 2 valid samples in the segment,
    yields None (absence is a value). A contributing point's displacement
    runs from its first to its last valid sample inside the segment; means
    over points are arithmetic and order-independent.
    """
    if not presence.present or presence.best_bbox is None:
        return None
    start, end = segment

    firsts: list[Point3] = []
    lasts: list[Point3] = []
    for traj in trajectories:
        first: Point3 | None = None
        last: Point3 | None = None
        count = 0
        for s in traj.samples:
            if s.valid and start <= s.frame_index <= end:
                count += 1
                if first is None:
                    first = s.point
                last = s.point
        if count >= 2:
            firsts.append(first)  # type: ignore[arg-type]
            lasts.append(last)  # type: ignore[arg-type]

    if not firsts:
        return None

    # fsum keeps the means exactly permutation-invariant.
    n = len(firsts)
    first_mean = Point3(
        x=math.fsum(p.x for p in firsts) / n,
        y=math.fsum(p.y for p in firsts) / n,
        z=math.fsum(p.z for p in firsts) / n,
    )
    last_mean = Point3(
        x=math.fsum(p.x for p in lasts) / n,
        y=math.fsum(p.y for p in lasts) / n,
        z=math.fsum(p.z for p in lasts) / n,
    )
    motion = Point3(
        x=math.fsum(b.x - a.x for a, b in zip(firsts, lasts)) / n,
        y=math.fsum(b.y - a.y for a, b in zip(firsts, lasts)) / n,
        z=math.fsum(b.z - a.z for a, b in zip(firsts, lasts)) / n,
    )
    return MotionAttributes(
        entity_label=entity_label,
        segment_index=segment_index,
        first_position=first_mean,
        last_position=last_mean,
        motion_vector=motion,
        bbox=presence.best_bbox,
        first_frame=start,
        last_frame=end,
    )
