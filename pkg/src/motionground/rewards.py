"""Reward shaping for reinforcement fine-tuning over grouped rollouts.

Pure functions only: a strict format gate over <think>/<answer> tagging,
ROUGE-L F1 for semantic overlap, an ordered-beats-shuffled temporal bonus,
an additive composition, and group-relative advantage normalization. The
policy update itself lives in the trainer, not here.
"""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Rollout:
    text: str
    correctness: float
    ordered_frames: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.correctness <= 1.0):
            raise ValueError(f"correctness must be in [0, 1], got {self.correctness}")


@dataclass(frozen=True, slots=True)
class RewardWeights:
    w_correct: float = 1.0
    w_format: float = 0.5
    w_rouge: float = 0.5
    alpha_temporal: float = 0.3
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("w_correct", "w_format", "w_rouge", "alpha_temporal"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


_WELL_FORMED_RE = re.compile(r"\s*<think>(.+)</think>\s*<answer>(.+)</answer>\s*\Z", re.DOTALL)
_ANSWER_SPAN_RE = re.compile(r"<answer>(.*)</answer>", re.DOTALL)


def format_reward(text: str) -> int:
    """1 iff the text is exactly one non-empty think span then one non-empty
    answer span, whitespace aside; nesting or repetition scores 0."""
    if (
        text.count("<think>") != 1
        or text.count("</think>") != 1
        or text.count("<answer>") != 1
        or text.count("</answer>") != 1
    ):
        return 0
    return 1 if _WELL_FORMED_RE.match(text) else 0


def answer_span(text: str) -> str | None:
    m = _ANSWER_SPAN_RE.search(text)
    return m.group(1) if m else None


def tokenize(text: str) -> list[str]:
    """Lowercase, split on Unicode whitespace, strip surrounding punctuation."""
    tokens = []
    for raw in text.lower().split():
        token = _strip_punct(raw)
        if token:
            tokens.append(token)
    return tokens


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ai in a:
        curr = [0]
        for j, bj in enumerate(b, start=1):
            if ai == bj:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """LCS-based F1 over normalized tokens; 0 when either side is empty."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def temporal_bonus(mean_correct_ordered: float, mean_correct_shuffled: float, alpha: float) -> float:
    """alpha when ordered-frame rollouts strictly beat shuffled ones, else 0."""
    return alpha if mean_correct_ordered > mean_correct_shuffled else 0.0


def total_reward(
    rollout: Rollout,
    weights: RewardWeights,
    rouge_ref: str,
    temporal: float = 0.0,
) -> float:
    """Additive composition of the reward components.

    ROUGE is scored on the answer span only when the rollout is well
    formed; malformed output is scored on its full text.
    """
    fmt = format_reward(rollout.text)
    if fmt:
        span = answer_span(rollout.text)
        rouge = rouge_l(span if span is not None else rollout.text, rouge_ref)
    else:
        rouge = rouge_l(rollout.text, rouge_ref)
    return (
        weights.w_correct * rollout.correctness
        + weights.w_format * fmt
        + weights.w_rouge * rouge
        + temporal
    )


def reward_components(
    rollout: Rollout,
    weights: RewardWeights,
    rouge_ref: str,
    temporal: float = 0.0,
) -> dict[str, float]:
    """Unweighted per-component breakdown plus the weighted total."""
    fmt = format_reward(rollout.text)
    span = answer_span(rollout.text) if fmt else None
    rouge = rouge_l(span if span is not None else rollout.text, rouge_ref)
    total = (
        weights.w_correct * rollout.correctness
        + weights.w_format * fmt
        + weights.w_rouge * rouge
        + temporal
    )
    return {
        "correctness": rollout.correctness,
        "format": float(fmt),
        "rouge": rouge,
        "temporal": temporal,
        "total": total,
    }


def process_rollout_groups(
    rollouts: list[tuple[str, Rollout]],
    weights: RewardWeights,
    refs_by_id: dict[str, str] | None = None,
) -> list[dict]:
    """Score (prompt_id, rollout) pairs group by group.

    Within a group, the temporal bonus applies to ordered-frame rollouts
    when they beat the shuffled ones on mean correctness (no shuffled
    rollouts, no contrast, no bonus). Advantages are normalized over the
    whole group. Groups keep first-appearance order; indexes are per group.
    """
    refs_by_id = refs_by_id or {}
    groups: dict[str, list[Rollout]] = {}
    for prompt_id, rollout in rollouts:
        groups.setdefault(prompt_id, []).append(rollout)

    rows: list[dict] = []
    for prompt_id, group in groups.items():
        ordered = [r.correctness for r in group if r.ordered_frames]
        shuffled = [r.correctness for r in group if not r.ordered_frames]
        bonus = 0.0
        if ordered and shuffled:
            bonus = temporal_bonus(
                math.fsum(ordered) / len(ordered),
                math.fsum(shuffled) / len(shuffled),
                weights.alpha_temporal,
            )
        ref = refs_by_id.get(prompt_id, "")
        components = [
            reward_components(r, weights, ref, temporal=bonus if r.ordered_frames else 0.0)
            for r in group
        ]
        advantages = group_advantages([c["total"] for c in components], weights.epsilon)
        for index, (comp, adv) in enumerate(zip(components, advantages)):
            total = comp.pop("total")
            rows.append({
                "prompt_id": prompt_id,
                "index": index,
                "components": comp,
                "reward": total,
                "advantage": adv,
            })
    return rows


def group_advantages(rewards: list[float], epsilon: float = 1e-6) -> list[float]:
    """Group-relative advantages: (r - mean) / (population std + epsilon).

    Singleton and zero-variance groups map to all-zero advantages.
    """
    if not rewards:
        raise ValueError("reward group must be non-empty")
    n = len(rewards)
    if all(r == rewards[0] for r in rewards):
        return [0.0] * n
    mean = math.fsum(rewards) / n
    deviations = [r - mean for r in rewards]
    std = math.sqrt(math.fsum(d * d for d in deviations) / n)
    denom = std + epsilon
    return [d / denom for d in deviations]
