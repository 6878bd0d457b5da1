"""Serialize interaction windows into marker-delimited prompt text.

The layout follows a fixed grammar: the instruction, the oldest
observation as full text, then for each step an action opening marker,
the action text, an observation marker, and the next observation block
(full text or rendered delta). Every byte of the output is covered by
exactly one role-tagged segment so downstream masking can project roles
onto tokens.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

from .diffcore import DEFAULT_STYLE, DeltaStyle, render_delta
from .history import DiffWindow, Window

ACTION_MARKER = "<|action|>"
OBSERVATION_MARKER = "<|observation|>"


class HistoryFormat(str, enum.Enum):
    FULL_TEXT = "full_text"
    DIFF_HISTORY = "diff_history"


class Role(str, enum.Enum):
    INSTRUCTION = "instruction"
    OBSERVATION_FULL = "observation_full"
    OBSERVATION_DELTA = "observation_delta"
    ACTION = "action"
    MARKER_ACTION = "marker_action"
    MARKER_OBSERVATION = "marker_observation"


class MarkerCollision(ValueError):
    """A marker string occurred inside rendered content."""

    def __init__(self, role: Role, step: int):
        super().__init__(f"marker string found inside {role.value} content at step {step}")
        self.role = role
        self.step = step


@dataclass(frozen=True)
class MarkerConfig:
    action_begin: str = ACTION_MARKER
    observation_begin: str = OBSERVATION_MARKER
    delta_style: DeltaStyle = DEFAULT_STYLE
    instruction_suffix: str = "\n"

    def __post_init__(self) -> None:
        if not self.action_begin or not self.observation_begin:
            raise ValueError("markers must be non-empty")
        if self.action_begin == self.observation_begin:
            raise ValueError("markers must be mutually distinct")

    @property
    def markers(self) -> tuple[str, str]:
        return (self.action_begin, self.observation_begin)


@dataclass(frozen=True)
class Segment:
    role: Role
    start: int
    end: int
    step: int  # 1-based step the span belongs to; 0 for the instruction


@dataclass
class SegmentMap:
    segments: list[Segment] = field(default_factory=list)

    def validate(self, text: str) -> None:
        pos = 0
        for seg in self.segments:
            if seg.start != pos or seg.end < seg.start:
                raise ValueError("segments must be contiguous and non-overlapping")
            pos = seg.end
        if pos != len(text):
            raise ValueError("segments must cover the text exactly")

    def texts(self, text: str) -> list[str]:
        return [text[s.start : s.end] for s in self.segments]


@dataclass
class RenderedSample:
    text: str
    segment_map: SegmentMap
    format: HistoryFormat


def _check_content(content: str, cfg: MarkerConfig, role: Role, step: int) -> None:
    for marker in cfg.markers:
        if marker in content:
            raise MarkerCollision(role, step)


def render_history(
    instruction: str,
    blocks: list[tuple[Role, str]],
    actions: list[str],
    cfg: MarkerConfig,
    fmt: HistoryFormat,
    *,
    trailing_action_marker: bool = False,
    terminate_final_action: bool = False,
) -> RenderedSample:
    """Low-level renderer over pre-rendered observation blocks.

    `blocks` holds one (role, text) entry per observation, oldest first.
    `actions` pairs with blocks one-to-one, or is one shorter when the
    newest observation is still awaiting an action (prompt construction,
    which also sets `trailing_action_marker`).
    """
    if len(actions) == len(blocks) - 1:
        if terminate_final_action:
            raise ValueError("cannot terminate a final action that does not exist")
    elif len(actions) != len(blocks):
        raise ValueError(f"{len(blocks)} observation blocks vs {len(actions)} actions")

    _check_content(instruction, cfg, Role.INSTRUCTION, 0)
    parts: list[str] = []
    segments: list[Segment] = []
    pos = 0

    def emit(role: Role, content: str, step: int) -> None:
        nonlocal pos
        parts.append(content)
        segments.append(Segment(role, pos, pos + len(content), step))
        pos += len(content)

    emit(Role.INSTRUCTION, instruction + cfg.instruction_suffix, 0)

    anchor_role, anchor_text = blocks[0]
    _check_content(anchor_text, cfg, anchor_role, 1)
    emit(anchor_role, anchor_text + "\n" if anchor_text else "", 1)

    for i, action in enumerate(actions, start=1):
        _check_content(action, cfg, Role.ACTION, i)
        emit(Role.MARKER_ACTION, cfg.action_begin, i)
        emit(Role.ACTION, action + "\n", i)
        if i < len(blocks) or terminate_final_action:
            emit(Role.MARKER_OBSERVATION, cfg.observation_begin, i)
        if i < len(blocks):
            role, text = blocks[i]
            _check_content(text, cfg, role, i + 1)
            emit(role, "\n" + text + "\n" if text else "\n", i + 1)

    if trailing_action_marker:
        emit(Role.MARKER_ACTION, cfg.action_begin, len(blocks))

    text = "".join(parts)
    seg_map = SegmentMap(segments)
    seg_map.validate(text)
    return RenderedSample(text=text, segment_map=seg_map, format=fmt)


def _window_blocks(w: Window | DiffWindow, cfg: MarkerConfig) -> tuple[list[tuple[Role, str]], list[str], HistoryFormat]:
    if isinstance(w, DiffWindow):
        blocks: list[tuple[Role, str]] = [(Role.OBSERVATION_FULL, w.anchor_observation)]
        blocks += [
            (Role.OBSERVATION_DELTA, render_delta(delta, cfg.delta_style))
            for delta, _ in w.tail
        ]
        actions = [w.first_action] + [a for _, a in w.tail]
        return blocks, actions, HistoryFormat.DIFF_HISTORY
    w.validate()
    blocks = [(Role.OBSERVATION_FULL, obs) for obs, _ in w.steps]
    actions = [a for _, a in w.steps]
    return blocks, actions, HistoryFormat.FULL_TEXT


def render_sample(
    w: Window | DiffWindow,
    cfg: MarkerConfig = MarkerConfig(),
    *,
    include_trailing_action_marker: bool = False,
    terminate_final_action: bool = False,
) -> RenderedSample:
    """Render a window (full-text or delta form) into marker-tagged text.

    With `terminate_final_action`, the newest action is closed with the
    observation marker like all earlier ones (the dataset layout). With
    `include_trailing_action_marker`, the text additionally ends with the
    action marker, priming an external generator.
    """
    blocks, actions, fmt = _window_blocks(w, cfg)
    return render_history(
        w.instruction,
        blocks,
        actions,
        cfg,
        fmt,
        trailing_action_marker=include_trailing_action_marker,
        terminate_final_action=terminate_final_action or include_trailing_action_marker,
    )


class ExtractedAction(NamedTuple):
    text: str
    unterminated: bool


def extract_action(generated: str, cfg: MarkerConfig = MarkerConfig()) -> ExtractedAction:
    """Pull the action text out of a generated continuation.

    Takes everything before the first observation marker, trimmed of
    surrounding whitespace. A continuation that never produces the marker
    comes back whole, flagged unterminated.
    """
    idx = generated.find(cfg.observation_begin)
    if idx < 0:
        return ExtractedAction(generated.strip(), True)
    return ExtractedAction(generated[:idx].strip(), False)


def normalize_action(action: str) -> str:
    return " ".join(action.split())


def validate_action(action: str, vocabulary: set[str] | frozenset[str]) -> bool:
    """True iff the action matches a vocabulary entry after whitespace
    normalization (strip + collapse runs)."""
    if not vocabulary:
        raise ValueError("action vocabulary must be non-empty")
    normalized = {normalize_action(v) for v in vocabulary}
    return normalize_action(action) in normalized
