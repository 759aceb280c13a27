from __future__ import annotations

import json
import struct
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionground.errors import (
    BundleValidationError,
    DepthFormatError,
    ManifestError,
    QAFormatError,
)
from motionground.interchange import (
    Detection,
    DepthFrame,
    PointTrack,
    TrackSample,
    VideoMeta,
    encode_depth_frame,
    parse_depth_frame,
    parse_manifest,
    parse_qa,
    validate_bundle,
    write_qa,
)

from .conftest import ball_depth, ball_detections, ball_meta, ball_tracks, qa_record


def write_manifest(tmp_path, videos):
    path = tmp_path / "dataset.json"
    path.write_text(json.dumps({"videos": videos}), encoding="utf-8")
    return path


def video_obj(video_id="v0", width=64, height=48, fps=30.0, frame_count=240):
    return {
        "video_id": video_id,
        "width": width,
        "height": height,
        "fps": fps,
        "frame_count": frame_count,
        "detections": f"{video_id}/detections.jsonl",
        "tracks": f"{video_id}/tracks.json",
        "depth_dir": f"{video_id}/depth",
    }


class TestManifest:
    def test_single_video_fields_copied(self, tmp_path):
        path = write_manifest(tmp_path, [video_obj(frame_count=240, fps=30.0)])
        entries = parse_manifest(path)
        assert len(entries) == 1
        meta = entries[0].meta
        assert meta.frame_count == 240
        assert meta.fps == 30.0
        assert entries[0].detections_path == tmp_path / "v0" / "detections.jsonl"

    def test_zero_fps_names_field(self, tmp_path):
        path = write_manifest(tmp_path, [video_obj(fps=0)])
        with pytest.raises(ManifestError) as exc:
            parse_manifest(path)
        assert exc.value.field == "videos[0].fps"

    def test_missing_field_names_path(self, tmp_path):
        bad = video_obj()
        del bad["tracks"]
        path = write_manifest(tmp_path, [video_obj(), bad])
        with pytest.raises(ManifestError) as exc:
            parse_manifest(path)
        assert exc.value.field == "videos[1].tracks"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError, match="not found"):
            parse_manifest(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "dataset.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ManifestError, match="malformed JSON"):
            parse_manifest(path)

    def test_stats_smoke_means(self, tmp_path):
        # 5 integer frame counts can average 545.8 exactly; 3 cannot
        # (no integer sum hits 545.8 +- 0.1), so the smoke set uses 5.
        counts = [546, 546, 546, 545, 546]
        path = write_manifest(tmp_path, [
            video_obj(video_id=f"v{i}", fps=27.37, frame_count=c) for i, c in enumerate(counts)
        ])
        entries = parse_manifest(path)
        mean_frames = sum(e.meta.frame_count for e in entries) / len(entries)
        mean_fps = sum(e.meta.fps for e in entries) / len(entries)
        assert abs(mean_frames - 545.8) <= 0.1
        assert abs(mean_fps - 27.37) <= 0.1

    def test_no_artifact_reads(self, tmp_path):
        # referenced artifact files do not need to exist at manifest time
        path = write_manifest(tmp_path, [video_obj()])
        entries = parse_manifest(path)
        assert not entries[0].detections_path.exists()


class TestDepthCodec:
    def test_decode_2x2(self):
        buf = struct.pack("<4sIII", b"MGD1", 2, 2, 0) + struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)
        frame = parse_depth_frame(buf)
        assert frame.width == 2 and frame.height == 2 and frame.frame_index == 0
        assert frame.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]

    def test_truncated_payload(self):
        buf = struct.pack("<4sIII", b"MGD1", 2, 2, 0) + struct.pack("<3f", 1.0, 2.0, 3.0)
        with pytest.raises(DepthFormatError, match="size mismatch"):
            parse_depth_frame(buf)

    def test_bad_magic(self):
        buf = struct.pack("<4sIII", b"XXXX", 1, 1, 0) + struct.pack("<f", 1.0)
        with pytest.raises(DepthFormatError, match="magic"):
            parse_depth_frame(buf)

    def test_short_header(self):
        with pytest.raises(DepthFormatError, match="too short"):
            parse_depth_frame(b"MGD1")

    @given(
        width=st.integers(min_value=1, max_value=8),
        height=st.integers(min_value=1, max_value=8),
        frame_index=st.integers(min_value=0, max_value=2**32 - 1),
        data=st.data(),
    )
    @settings(max_examples=200)
    def test_round_trip_byte_identity(self, width, height, frame_index, data):
        payload = data.draw(st.binary(min_size=4 * width * height, max_size=4 * width * height))
        buf = struct.pack("<4sIII", b"MGD1", width, height, frame_index) + payload
        assert encode_depth_frame(parse_depth_frame(buf)) == buf

    def test_encode_then_parse(self):
        frame = DepthFrame(frame_index=7, width=3, height=2,
                           values=np.arange(6, dtype=np.float32).reshape(2, 3) + 1)
        again = parse_depth_frame(encode_depth_frame(frame))
        assert again.frame_index == 7
        assert np.array_equal(again.values, frame.values)


class TestBundleValidation:
    def test_consistent_inputs_entity_union(self, ball_bundle):
        assert set(ball_bundle.entities) == {"ball", "cart"}
        assert ball_bundle.entities == ("ball", "cart")  # ordered by first detection

    def test_track_length_violation_names_track(self):
        meta = ball_meta()
        tracks = ball_tracks(meta)
        short = replace(tracks[1], samples=tracks[1].samples[:-2])
        with pytest.raises(BundleValidationError) as exc:
            validate_bundle(meta, ball_detections(meta), [tracks[0], short], ball_depth(meta))
        assert any("ball, point 1" in v and "28 samples" in v for v in exc.value.violations)

    def test_bbox_violation_reports_frame_and_bbox(self):
        meta = ball_meta()
        dets = ball_detections(meta)
        dets[3] = replace(dets[3], bbox=(1.0, 2.0, 40.0, 8.0))
        with pytest.raises(BundleValidationError) as exc:
            validate_bundle(meta, dets, ball_tracks(meta), ball_depth(meta))
        assert any("frame 3" in v and "40.0" in v for v in exc.value.violations)

    def test_collects_every_violation(self):
        meta = ball_meta()
        dets = ball_detections(meta)
        dets[0] = replace(dets[0], confidence=1.5)
        dets[1] = replace(dets[1], frame_index=999)
        tracks = ball_tracks(meta)
        short = replace(tracks[0], samples=tracks[0].samples[:5])
        with pytest.raises(BundleValidationError) as exc:
            validate_bundle(meta, dets, [short], ball_depth(meta))
        assert len(exc.value.violations) >= 3

    def test_out_of_bounds_visible_sample_clamped_invisible(self):
        meta = ball_meta()
        tracks = ball_tracks(meta)
        wild = replace(
            tracks[0],
            samples=tracks[0].samples[:-1] + (TrackSample(x=99.0, y=-3.0, visible=True),),
        )
        bundle = validate_bundle(meta, ball_detections(meta), [wild] + tracks[1:], ball_depth(meta))
        clamped = bundle.tracks[0].samples[-1]
        assert not clamped.visible
        assert clamped.x == meta.width and clamped.y == 0.0

    def test_track_without_detections_is_violation(self):
        meta = ball_meta()
        tracks = ball_tracks(meta) + [
            replace(ball_tracks(meta)[0], entity_label="ghost")
        ]
        with pytest.raises(BundleValidationError) as exc:
            validate_bundle(meta, ball_detections(meta), tracks, ball_depth(meta))
        assert any("ghost" in v and "no detections" in v for v in exc.value.violations)

    def test_depth_dimension_mismatch(self):
        meta = ball_meta()
        depth = ball_depth(meta)
        bad = DepthFrame(frame_index=0, width=8, height=8, values=np.ones((8, 8), np.float32))
        depth[0] = bad
        with pytest.raises(BundleValidationError) as exc:
            validate_bundle(meta, ball_detections(meta), ball_tracks(meta), depth)
        assert any("depth frame 0" in v for v in exc.value.violations)


MUTATIONS = [
    pytest.param(lambda d, t: (
        [replace(d[0], frame_index=d[0].frame_index + 1000)] + d[1:], t), id="frame-out-of-range"),
    pytest.param(lambda d, t: (
        [replace(d[0], bbox=(5.0, 2.0, 5.0, 8.0))] + d[1:], t), id="degenerate-bbox"),
    pytest.param(lambda d, t: (
        [replace(d[0], bbox=(-1.0, 2.0, 5.0, 8.0))] + d[1:], t), id="negative-bbox"),
    pytest.param(lambda d, t: (
        [replace(d[0], confidence=2.0)] + d[1:], t), id="confidence-above-one"),
    pytest.param(lambda d, t: (
        d, [replace(t[0], samples=t[0].samples + t[0].samples[:1])] + t[1:]), id="track-too-long"),
    pytest.param(lambda d, t: (
        d, [replace(t[0], entity_label="never_detected")] + t[1:]), id="orphan-track"),
]


@pytest.mark.parametrize("mutate", MUTATIONS)
def test_single_field_mutation_rejected(mutate):
    meta = ball_meta()
    dets, tracks = mutate(ball_detections(meta), ball_tracks(meta))
    with pytest.raises(BundleValidationError):
        validate_bundle(meta, dets, tracks, ball_depth(meta))


class TestQAParsing:
    def test_su_record(self, tmp_path):
        path = tmp_path / "qa.jsonl"
        write_qa(path, [qa_record(category="SU")])
        records = parse_qa(path)
        assert records[0].category == "SU"
        assert records[0].question_type == "factual"

    def test_unknown_category_names_line(self, tmp_path):
        path = tmp_path / "qa.jsonl"
        good = qa_record()
        write_qa(path, [good])
        line = path.read_text(encoding="utf-8").rstrip("\n")
        bad = json.loads(line)
        bad["category"] = "XX"
        path.write_text(line + "\n" + json.dumps(bad) + "\n", encoding="utf-8")
        with pytest.raises(QAFormatError, match="line 2") as exc:
            parse_qa(path)
        assert "XX" in str(exc.value)

    def test_factual_needs_entities(self, tmp_path):
        path = tmp_path / "qa.jsonl"
        rec = {
            "id": "q1", "video_id": "v", "question": "Q?", "ground_truth": "A",
            "question_type": "factual", "category": "SU", "polarity": "positive",
            "entities": [],
        }
        path.write_text(json.dumps(rec) + "\n", encoding="utf-8")
        with pytest.raises(QAFormatError, match="entity list"):
            parse_qa(path)

    def test_critical_may_omit_entities(self, tmp_path):
        path = tmp_path / "qa.jsonl"
        write_qa(path, [qa_record(question_type="critical", entities=())])
        assert parse_qa(path)[0].entities == ()

    def test_round_trip_identity(self, tmp_path):
        records = [
            qa_record(rid=f"q{i}", category=c, polarity=p, question_type=qt,
                      entities=("ball",) if qt == "factual" else ())
            for i, (c, p, qt) in enumerate([
                ("SU", "positive", "factual"),
                ("PA", "negative", "critical"),
                ("TU", "negative", "factual"),
            ])
        ]
        path = tmp_path / "qa.jsonl"
        write_qa(path, records)
        assert parse_qa(path) == records

    def test_malformed_line_number(self, tmp_path):
        path = tmp_path / "qa.jsonl"
        write_qa(path, [qa_record()])
        with path.open("a", encoding="utf-8") as fh:
            fh.write("{broken\n")
        with pytest.raises(QAFormatError) as exc:
            parse_qa(path)
        assert exc.value.line == 2


label_st = st.text(alphabet="abcdefgh XYZ'é", min_size=1, max_size=12).filter(str.strip)
text_st = st.text(min_size=1, max_size=40).filter(lambda s: s.strip())


@given(records=st.lists(
    st.builds(
        lambda rid, vid, q, gt, qt, cat, pol, ents: qa_record(
            rid=rid, video_id=vid, question=q, ground_truth=gt,
            question_type=qt, category=cat, polarity=pol,
            entities=tuple(ents) if qt == "critical" else tuple(ents) or ("thing",),
        ),
        rid=text_st, vid=text_st, q=text_st, gt=text_st,
        qt=st.sampled_from(["factual", "critical"]),
        cat=st.sampled_from(["SU", "TU", "MAR", "PC", "PA"]),
        pol=st.sampled_from(["positive", "negative"]),
        ents=st.lists(label_st, max_size=3),
    ),
    max_size=8,
))
@settings(max_examples=25, deadline=None)
def test_qa_round_trip_randomized(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("qa") / "qa.jsonl"
    write_qa(path, records)
    assert parse_qa(path) == records


@given(data=st.data())
@settings(max_examples=25, deadline=None)
def test_detection_and_track_round_trips(tmp_path_factory, data):
    from motionground.interchange import parse_detections, parse_tracks, write_detections, write_tracks

    coord = st.floats(min_value=0, max_value=100, allow_nan=False)
    dets = data.draw(st.lists(
        st.builds(
            lambda f, label, x, y, w, h, score: Detection(
                frame_index=f, entity_label=label,
                bbox=(x, y, x + w, y + h), confidence=score,
            ),
            f=st.integers(min_value=0, max_value=100), label=label_st,
            x=coord, y=coord,
            w=st.floats(min_value=0.1, max_value=50), h=st.floats(min_value=0.1, max_value=50),
            score=st.floats(min_value=0, max_value=1, allow_nan=False),
        ),
        max_size=6,
    ))
    dir_ = tmp_path_factory.mktemp("rt")
    write_detections(dir_ / "d.jsonl", dets)
    assert parse_detections(dir_ / "d.jsonl") == dets

    n_frames = data.draw(st.integers(min_value=1, max_value=6))
    tracks = data.draw(st.lists(
        st.builds(
            lambda label, pts: [
                PointTrack(entity_label=label, point_id=i, samples=tuple(
                    TrackSample(x=s[0], y=s[1], visible=s[2]) for s in p
                ))
                for i, p in enumerate(pts)
            ],
            label=label_st,
            pts=st.lists(
                st.lists(st.tuples(coord, coord, st.booleans()), min_size=n_frames, max_size=n_frames),
                min_size=1, max_size=3,
            ),
        ),
        max_size=3,
    ))
    flat = [t for group in tracks for t in group]
    # writer groups by entity; duplicate labels across groups would merge
    labels = [group[0].entity_label for group in tracks if group]
    if len(labels) == len(set(labels)):
        write_tracks(dir_ / "t.json", flat)
        assert sorted(parse_tracks(dir_ / "t.json"), key=lambda t: (t.entity_label, t.point_id)) == \
            sorted(flat, key=lambda t: (t.entity_label, t.point_id))


def test_video_meta_invariants():
    with pytest.raises(ManifestError):
        VideoMeta(video_id="v", width=0, height=10, fps=30.0, frame_count=10)
    with pytest.raises(ManifestError):
        VideoMeta(video_id="v", width=10, height=10, fps=-1.0, frame_count=10)
    with pytest.raises(ManifestError):
        VideoMeta(video_id="", width=10, height=10, fps=1.0, frame_count=10)
