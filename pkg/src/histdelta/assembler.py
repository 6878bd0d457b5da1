"""Inference-time prompt construction under a token budget.

Given a trajectory prefix (the newest observation still awaiting an
action), the builder renders the longest history that fits the budget,
walking the candidate horizon down from its maximum until the encoded
prompt fits. Delta-form prompts recompute every delta from the raw
observations at each candidate anchor, since moving the anchor changes
all downstream deltas. Every prompt ends with the action marker.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diffcore import compute_delta, render_delta
from .formatting import HistoryFormat, MarkerConfig, Role, render_history
from .history import Trajectory
from .tokenizer import TokenizerSpec, TokenSequence


class BudgetExhausted(ValueError):
    """Even a single-step prompt exceeds the token budget."""


@dataclass
class PromptRequest:
    trajectory_prefix: Trajectory  # one more observation than actions
    h_max: int
    budget: int
    format: HistoryFormat = HistoryFormat.DIFF_HISTORY
    cfg: MarkerConfig = field(default_factory=MarkerConfig)

    def validate(self) -> None:
        t = self.trajectory_prefix
        if len(t.observations) != len(t.actions) + 1:
            raise ValueError(
                "prefix must carry exactly one more observation than actions"
            )
        if not t.instruction:
            raise ValueError("instruction must be non-empty")
        if self.h_max < 1 or self.budget < 1:
            raise ValueError("h_max and budget must be >= 1")


@dataclass
class AssembledPrompt:
    tokens: TokenSequence
    chosen_h: int
    text: str
    degraded: bool = False


def _render_candidate(req: PromptRequest, h: int) -> str:
    t = req.trajectory_prefix
    end = len(t.observations)
    start = end - h
    obs = t.observations[start:end]
    actions = t.actions[start : end - 1]
    if req.format is HistoryFormat.DIFF_HISTORY:
        blocks = [(Role.OBSERVATION_FULL, obs[0])]
        blocks += [
            (Role.OBSERVATION_DELTA, render_delta(compute_delta(a, b), req.cfg.delta_style))
            for a, b in zip(obs, obs[1:])
        ]
    else:
        blocks = [(Role.OBSERVATION_FULL, o) for o in obs]
    rendered = render_history(
        t.instruction,
        blocks,
        actions,
        req.cfg,
        req.format,
        trailing_action_marker=True,
    )
    return rendered.text


def fit_check(
    window_render_tokens: list[int], instruction_tokens: int, budget: int
) -> int:
    """Largest horizon whose render fits the budget; 0 when none does.

    `window_render_tokens[i]` is the encoded size (instruction excluded)
    at horizon h' = len(list) - i, i.e. counts run from the maximum
    horizon down to 1. The scan walks down from the top and takes the
    first fit; counts need not be monotone because re-anchoring changes
    delta sizes.
    """
    n = len(window_render_tokens)
    for i, count in enumerate(window_render_tokens):
        if count + instruction_tokens <= budget:
            return n - i
    return 0


def build_prompt(
    req: PromptRequest, tok: TokenizerSpec, allow_truncated_fallback: bool = False
) -> AssembledPrompt:
    """Build the longest-fitting prompt ending in the action marker.

    Scans h' from min(h_max, steps available) down to 1, rendering and
    encoding each candidate. Raises BudgetExhausted when even h' = 1 is
    too long, unless the caller opts into a degraded single-observation
    prompt truncated on the right (the trailing marker is kept).
    """
    req.validate()
    for marker in req.cfg.markers:
        if marker not in tok.special_tokens:
            raise ValueError(f"marker {marker!r} is not registered with the tokenizer")

    h_cap = min(req.h_max, len(req.trajectory_prefix.observations))
    for h in range(h_cap, 0, -1):
        text = _render_candidate(req, h)
        seq = tok.encode(text)
        if len(seq) <= req.budget:
            return AssembledPrompt(tokens=seq, chosen_h=h, text=text)

    if not allow_truncated_fallback:
        raise BudgetExhausted(
            f"single-step prompt does not fit in {req.budget} tokens"
        )
    text = _render_candidate(req, 1)
    ids = tok.encode(text).ids
    marker_id = tok.special_tokens[req.cfg.action_begin]
    ids = ids[: req.budget - 1] + [marker_id]
    return AssembledPrompt(
        tokens=TokenSequence(ids),
        chosen_h=1,
        text=tok.decode(ids),
        degraded=True,
    )
