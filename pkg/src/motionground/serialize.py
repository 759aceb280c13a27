"""Byte-deterministic rendering of grounding profiles and QA prompts.

All reals print with exactly two decimals (IEEE round-half-even), newlines
are LF, and absent segments are omitted rather than printed empty, so the
same inputs always produce the same bytes on every platform.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .errors import PromptError
from .geometry import MotionAttributes
from .interchange import QARecord

CONVERSATION_SETUP = (
    "A conversation between User and Assistant. The user asks a question, and the "
    "Assistant solves it. The Assistant first thinks about the reasoning process "
    "inside <think> </think> tags, then provides the final answer inside "
    "<answer> </answer> tags."
)

REASONING_INSTRUCTION = (
    "Please think about this question as if you were a human pondering deeply. "
    'Use internal dialogue such as "let me think", "wait", "hmm", "I see", and '
    "include verification or self-reflection in the reasoning process. Provide "
    "detailed reasoning in <think> </think>, then provide the final answer in "
    "<answer> </answer>."
)

ANSWER_INSTRUCTION = "Please provide your text answer within the <answer> </answer> tags."


@dataclass(frozen=True, slots=True)
class GroundingProfile:
    """Per-entity, per-segment motion attributes for one video.

    ``entities`` maps each label to one slot per planned segment (None where
    the entity is absent). Use :func:`ordered_entities` to apply the
    first-appearance ordering before rendering.
    """

    video_id: str
    entities: tuple[tuple[str, tuple[MotionAttributes | None, ...]], ...]

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "entities": [
                {
                    "label": label,
                    "segments": [
                        attrs.to_dict() | {"segment_number": i + 1}
                        for i, attrs in enumerate(slots)
                        if attrs is not None
                    ],
                }
                for label, slots in self.entities
            ],
        }


def ordered_entities(
    entries: Sequence[tuple[str, Sequence[MotionAttributes | None]]],
) -> tuple[tuple[str, tuple[MotionAttributes | None, ...]], ...]:
    """Order by earliest present segment, never-present last, ties by label."""
    def key(entry: tuple[str, Sequence[MotionAttributes | None]]):
        label, slots = entry
        first = next((i for i, a in enumerate(slots) if a is not None), len(slots))
        return (first, label)

    return tuple((label, tuple(slots)) for label, slots in sorted(entries, key=key))


def build_grounding_profile(
    video_id: str,
    entries: Sequence[tuple[str, Sequence[MotionAttributes | None]]],
) -> GroundingProfile:
    lengths = {len(slots) for _, slots in entries}
    if len(lengths) > 1:
        raise PromptError(f"entities disagree on segment count: {sorted(lengths)}")
    return GroundingProfile(video_id=video_id, entities=ordered_entities(entries))


def _fmt(x: float) -> str:
    # values rounding to zero always print "0.00", never "-0.00"
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _triple(p) -> str:
    return f"({_fmt(p.x)}, {_fmt(p.y)}, {_fmt(p.z)})"


def render_segment_line(number: int, attrs: MotionAttributes) -> str:
    return (
        f"* Segment #{number}: "
        f"First Position {_triple(attrs.first_position)}, "
        f"Motion Vector {_triple(attrs.motion_vector)}, "
        f"Last Position {_triple(attrs.last_position)}, "
        f"Bounding Box ({_fmt(attrs.bbox[0])}, {_fmt(attrs.bbox[1])}, "
        f"{_fmt(attrs.bbox[2])}, {_fmt(attrs.bbox[3])}), "
        f"Frame {attrs.first_frame}...{attrs.last_frame}"
    )


def render_entity_block(profile: GroundingProfile) -> str:
    """One header per entity, one line per present segment, absent omitted.

    Entity numbers are dense and 1-based in profile order; segment numbers
    are 1-based over the full segment plan, so omitting absent segments
    never renumbers the present ones.
    """
    lines: list[str] = []
    for k, (label, slots) in enumerate(profile.entities, start=1):
        lines.append(f"Entity #{k}: {label}")
        for j, attrs in enumerate(slots, start=1):
            if attrs is not None:
                lines.append(render_segment_line(j, attrs))
    return "".join(line + "\n" for line in lines)


_SEGMENT_LINE_RE = re.compile(
    r"^\* Segment #(?P<number>\d+): "
    r"First Position \((?P<fx>-?\d+\.\d{2}), (?P<fy>-?\d+\.\d{2}), (?P<fz>-?\d+\.\d{2})\), "
    r"Motion Vector \((?P<mx>-?\d+\.\d{2}), (?P<my>-?\d+\.\d{2}), (?P<mz>-?\d+\.\d{2})\), "
    r"Last Position \((?P<lx>-?\d+\.\d{2}), (?P<ly>-?\d+\.\d{2}), (?P<lz>-?\d+\.\d{2})\), "
    r"Bounding Box \((?P<bx1>-?\d+\.\d{2}), (?P<by1>-?\d+\.\d{2}), (?P<bx2>-?\d+\.\d{2}), (?P<by2>-?\d+\.\d{2})\), "
    r"Frame (?P<first>\d+)\.\.\.(?P<last>\d+)$"
)


def parse_segment_line(line: str) -> dict:
    """Grammar for one rendered segment line; inverse of the renderer at
    the printed 2-decimal precision."""
    m = _SEGMENT_LINE_RE.match(line)
    if m is None:
        raise PromptError(f"not a segment line: {line!r}")
    g = m.groupdict()
    return {
        "segment_number": int(g["number"]),
        "first_position": (float(g["fx"]), float(g["fy"]), float(g["fz"])),
        "motion_vector": (float(g["mx"]), float(g["my"]), float(g["mz"])),
        "last_position": (float(g["lx"]), float(g["ly"]), float(g["lz"])),
        "bbox": (float(g["bx1"]), float(g["by1"]), float(g["bx2"]), float(g["by2"])),
        "first_frame": int(g["first"]),
        "last_frame": int(g["last"]),
    }


@dataclass(frozen=True, slots=True)
class PromptBundle:
    system_preamble: str
    question_block: str
    grounding_block: str
    reasoning_instruction: str
    answer_instruction: str

    def flatten(self, include_setup: bool = True) -> str:
        """Concatenate blocks in fixed order, blank-line separated, LF only.

        ``include_setup=False`` drops the conversation setup for callers
        that send it as an API-level system message instead.
        """
        blocks = [
            self.system_preamble if include_setup else "",
            self.question_block,
            self.grounding_block,
            self.reasoning_instruction,
            self.answer_instruction,
        ]
        return "\n\n".join(b.rstrip("\n") for b in blocks if b) + "\n"


def render_prompt(qa: QARecord, grounding_text: str) -> PromptBundle:
    """Assemble the full QA prompt around a rendered grounding block.

    ``grounding_text`` may be empty (ablation runs drop the block entirely).
    """
    if not qa.question.strip():
        raise PromptError(f"record {qa.id}: empty question")
    return PromptBundle(
        system_preamble=CONVERSATION_SETUP,
        question_block=f"<Question> {qa.question} </Question>",
        grounding_block=grounding_text,
        reasoning_instruction=REASONING_INSTRUCTION,
        answer_instruction=ANSWER_INSTRUCTION,
    )
