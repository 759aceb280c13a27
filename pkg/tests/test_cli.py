from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from motionground.cli import main
from motionground.interchange import write_qa

from .conftest import qa_record, write_fixture_dataset

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def runner():
    return CliRunner()


def run_profile(runner, root, out="out", extra=()):
    return runner.invoke(main, [
        "profile",
        "--manifest", str(root / "dataset.json"),
        "--qa", str(root / "qa.jsonl"),
        "--out", str(root / out),
        *extra,
    ])


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


class TestProfile:
    def test_two_video_fixture_succeeds(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        result = run_profile(runner, tmp_path)
        assert result.exit_code == 0, result.output
        for video in ("vid_ball", "vid_cart"):
            assert (tmp_path / "out" / video / "segments.json").is_file()
            assert (tmp_path / "out" / video / "artifacts.json").is_file()
        prompts = list((tmp_path / "out").rglob("prompt.txt"))
        assert len(prompts) == 4
        assert all(p.stat().st_size > 0 for p in prompts)

    def test_matches_golden_bytes(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        assert run_profile(runner, tmp_path).exit_code == 0
        got = (tmp_path / "out" / "vid_ball" / "qa_0_factual" / "prompt.txt").read_bytes()
        assert got == (GOLDEN_DIR / "prompt_vid_ball_factual.txt").read_bytes()
        got = (tmp_path / "out" / "vid_ball" / "qa_0_critical" / "prompt.txt").read_bytes()
        assert got == (GOLDEN_DIR / "prompt_vid_ball_critical.txt").read_bytes()

    def test_rerun_is_byte_idempotent(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        assert run_profile(runner, tmp_path).exit_code == 0
        first = tree_bytes(tmp_path / "out")
        assert run_profile(runner, tmp_path).exit_code == 0
        assert tree_bytes(tmp_path / "out") == first

    def test_parallel_matches_serial(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        assert run_profile(runner, tmp_path, out="serial").exit_code == 0
        assert run_profile(runner, tmp_path, out="par", extra=["--parallel", "4"]).exit_code == 0
        serial = tree_bytes(tmp_path / "serial")
        parallel = tree_bytes(tmp_path / "par")
        assert serial == parallel

    def test_corrupt_depth_isolated(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        bad = tmp_path / "vid_cart" / "depth" / "depth_000003.bin"
        bad.write_bytes(b"JUNKJUNKJUNK")
        result = run_profile(runner, tmp_path)
        assert result.exit_code == 1
        # healthy video still fully processed
        assert (tmp_path / "out" / "vid_ball" / "qa_0_factual" / "prompt.txt").is_file()
        assert not (tmp_path / "out" / "vid_cart" / "qa_1_factual").exists()
        ledger = json.loads((tmp_path / "out" / "errors.json").read_text(encoding="utf-8"))
        assert any("vid_cart" in item["item"] for item in ledger)

    def test_unknown_video_reported(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        extra = qa_record(rid="qa_orphan", video_id="vid_missing")
        records_path = tmp_path / "qa.jsonl"
        with records_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({
                "id": extra.id, "video_id": extra.video_id, "question": extra.question,
                "ground_truth": extra.ground_truth, "question_type": extra.question_type,
                "category": extra.category, "polarity": extra.polarity,
                "entities": list(extra.entities),
            }) + "\n")
        result = run_profile(runner, tmp_path)
        assert result.exit_code == 1
        ledger = json.loads((tmp_path / "out" / "errors.json").read_text(encoding="utf-8"))
        assert [item["item"] for item in ledger] == ["vid_missing/qa_orphan"]

    def test_no_grounding_ablation(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        assert run_profile(runner, tmp_path, extra=["--no-grounding"]).exit_code == 0
        prompt = (tmp_path / "out" / "vid_ball" / "qa_0_factual" / "prompt.txt").read_text(encoding="utf-8")
        assert "Entity #" not in prompt
        assert "<Question>" in prompt

    def test_omit_setup_flag(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        assert run_profile(runner, tmp_path, extra=["--omit-setup"]).exit_code == 0
        prompt = (tmp_path / "out" / "vid_ball" / "qa_0_factual" / "prompt.txt").read_text(encoding="utf-8")
        assert prompt.startswith("<Question>")

    def test_config_file_overrides_flags(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"no_grounding": True}), encoding="utf-8")
        result = run_profile(runner, tmp_path, extra=["--config", str(config)])
        assert result.exit_code == 0
        prompt = (tmp_path / "out" / "vid_ball" / "qa_0_factual" / "prompt.txt").read_text(encoding="utf-8")
        assert "Entity #" not in prompt

    def test_unknown_config_key_is_usage_error(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"bogus": 1}), encoding="utf-8")
        assert run_profile(runner, tmp_path, extra=["--config", str(config)]).exit_code == 2


class TestValidate:
    def test_clean_fixture(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        result = runner.invoke(main, ["validate", "--manifest", str(tmp_path / "dataset.json")])
        assert result.exit_code == 0
        assert "vid_ball: ok" in result.output

    def test_corrupt_artifact_fails(self, runner, tmp_path):
        write_fixture_dataset(tmp_path)
        (tmp_path / "vid_ball" / "tracks.json").write_text("[{)", encoding="utf-8")
        result = runner.invoke(main, ["validate", "--manifest", str(tmp_path / "dataset.json")])
        assert result.exit_code == 1
        assert "vid_ball: INVALID" in result.output


class TestStats:
    def test_output_and_file(self, runner, tmp_path):
        qa = tmp_path / "qa.jsonl"
        write_qa(qa, [qa_record(rid="a", category="SU"), qa_record(rid="b", category="TU")])
        out = tmp_path / "stats.json"
        result = runner.invoke(main, ["stats", "--qa", str(qa), "--out", str(out)])
        assert result.exit_code == 0
        assert "SU: 1 (50.00%)" in result.output
        assert "percent base: 2" in result.output
        table = json.loads(out.read_text(encoding="utf-8"))
        assert table["category"]["SU"]["count"] == 1


class TestScore:
    def write_inputs(self, tmp_path, responses):
        qa = tmp_path / "qa.jsonl"
        write_qa(qa, [
            qa_record(rid="a", category="SU"),
            qa_record(rid="b", category="TU"),
            qa_record(rid="c", category="PA"),
            qa_record(rid="d", category="SU"),
        ])
        resp = tmp_path / "judge_responses.jsonl"
        with resp.open("w", encoding="utf-8") as fh:
            for rid, text in responses.items():
                fh.write(json.dumps({"id": rid, "text": text}) + "\n")
        return qa, resp

    def test_all_correct_scores_100(self, runner, tmp_path):
        qa, resp = self.write_inputs(tmp_path, {
            r: "<Eval> Correct </Eval>" for r in ("a", "b", "c", "d")
        })
        result = runner.invoke(main, [
            "score", "--qa", str(qa), "--judge-responses", str(resp),
            "--out", str(tmp_path / "report"),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "report" / "report.json").read_text(encoding="utf-8"))
        assert report["overall"]["accuracy"] == 100.0
        assert "| Overall | 4 | 4 | 0 | 100.00 | 0.00 |" in (
            (tmp_path / "report" / "report.md").read_text(encoding="utf-8")
        )

    def test_missing_response_counts_unclear(self, runner, tmp_path):
        qa, resp = self.write_inputs(tmp_path, {
            r: "<Eval> Correct </Eval>" for r in ("a", "b", "c")
        })
        result = runner.invoke(main, [
            "score", "--qa", str(qa), "--judge-responses", str(resp),
            "--out", str(tmp_path / "report"),
        ])
        assert result.exit_code == 0
        report = json.loads((tmp_path / "report" / "report.json").read_text(encoding="utf-8"))
        assert report["missing_response_ids"] == ["d"]
        assert report["overall"]["unclear"] == 1
        assert report["overall"]["accuracy"] == 75.0

    def test_duplicate_response_ids_error(self, runner, tmp_path):
        qa, resp = self.write_inputs(tmp_path, {"a": "<Eval> Correct </Eval>"})
        with resp.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"id": "a", "text": "<Eval> Incorrect </Eval>"}) + "\n")
        result = runner.invoke(main, [
            "score", "--qa", str(qa), "--judge-responses", str(resp),
            "--out", str(tmp_path / "report"),
        ])
        assert result.exit_code == 1
        assert "duplicate" in result.output

    def test_emit_judge_requests_mode(self, runner, tmp_path):
        qa, _ = self.write_inputs(tmp_path, {})
        answers = tmp_path / "responses.jsonl"
        with answers.open("w", encoding="utf-8") as fh:
            for rid in ("a", "b", "c", "d"):
                fh.write(json.dumps({"id": rid, "text": f"answer {rid}"}) + "\n")
        out = tmp_path / "judge_requests.jsonl"
        result = runner.invoke(main, [
            "score", "--qa", str(qa), "--responses", str(answers),
            "--emit-judge-requests", str(out),
        ])
        assert result.exit_code == 0, result.output
        lines = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
        assert [l["id"] for l in lines] == ["a", "b", "c", "d"]
        assert "<GT>" in lines[0]["prompt"]

    def test_mixed_modes_rejected(self, runner, tmp_path):
        qa, resp = self.write_inputs(tmp_path, {"a": "x"})
        result = runner.invoke(main, [
            "score", "--qa", str(qa), "--judge-responses", str(resp),
            "--out", str(tmp_path / "r"), "--responses", str(resp),
        ])
        assert result.exit_code == 2


class TestRewards:
    def test_end_to_end_advantages(self, runner, tmp_path):
        qa = tmp_path / "qa.jsonl"
        write_qa(qa, [qa_record(rid="p1", ground_truth="green light")])
        rollouts = tmp_path / "rollouts.jsonl"
        rows = [
            {"prompt_id": "p1", "text": "<think>t</think><answer>green light</answer>",
             "correctness": 1.0, "ordered": True},
            {"prompt_id": "p1", "text": "wrong", "correctness": 0.0, "ordered": False},
        ]
        with rollouts.open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        out = tmp_path / "advantages.jsonl"
        result = runner.invoke(main, [
            "rewards", "--rollouts", str(rollouts), "--out", str(out), "--qa", str(qa),
        ])
        assert result.exit_code == 0, result.output
        lines = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
        assert len(lines) == 2
        # ordered, correct, well-formed, matching answer, beats shuffled:
        # 1*1 + 0.5*1 + 0.5*1 + 0.3 = 2.3
        assert lines[0]["reward"] == pytest.approx(2.3)
        assert lines[0]["advantage"] > 0 > lines[1]["advantage"]
        assert lines[0]["components"]["format"] == 1.0

    def test_malformed_rollout_line(self, runner, tmp_path):
        rollouts = tmp_path / "rollouts.jsonl"
        rollouts.write_text('{"prompt_id": "p", "text": "x"}\n', encoding="utf-8")
        result = runner.invoke(main, [
            "rewards", "--rollouts", str(rollouts), "--out", str(tmp_path / "a.jsonl"),
        ])
        assert result.exit_code == 1
        assert "line 1" in result.output


def test_invalid_invocation_exits_2(runner):
    assert runner.invoke(main, ["profile"]).exit_code == 2
    assert runner.invoke(main, ["unknown-command"]).exit_code == 2
