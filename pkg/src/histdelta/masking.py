"""Per-token supervision masks over tokenized rendered samples.

Roles are projected from character segments onto tokens (by the byte a
token starts on), then a mask is derived from the objective:

* action-only: action tokens plus the observation marker that closes
  each action (the stopping signal a generator must learn) are
  supervised; everything else is context.
* action + world model: additionally supervises every observation or
  delta token from the second step onward. The oldest observation is
  never supervised.

Masks align with label positions under teacher forcing; consumers apply
the usual one-position shift between inputs and labels themselves.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .formatting import RenderedSample, Role
from .tokenizer import TokenizerSpec, TokenSequence


class AlignmentGap(ValueError):
    """Token offsets failed to cover the rendered text."""


class Objective(enum.Enum):
    ACTION_ONLY = "action_only"
    ACTION_AND_WORLD_MODEL = "action_and_world_model"


@dataclass
class TokenizedSample:
    tokens: TokenSequence
    roles: list[Role]
    steps: list[int]


@dataclass
class LossMask:
    bits: list[int]

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def supervised(self) -> int:
        return sum(self.bits)


def align_segments(sample: RenderedSample, t: TokenizerSpec) -> TokenizedSample:
    """Tokenize a rendered sample, tagging every token with a role.

    A token straddling a segment boundary takes the role of the segment
    containing its first byte; marker boundaries cannot straddle because
    markers are atomic tokens.
    """
    offsets = t.encode_with_offsets(sample.text)
    total_bytes = len(sample.text.encode("utf-8"))
    pos = 0
    for _, start, end in offsets:
        if start != pos:
            raise AlignmentGap(f"token offsets skip bytes at {pos}")
        pos = end
    if pos != total_bytes:
        raise AlignmentGap(f"token offsets cover {pos} of {total_bytes} bytes")

    # segment boundaries in byte space, cumulative over the char spans
    text = sample.text
    boundaries: list[tuple[int, Role, int]] = []  # (byte_start, role, step)
    byte_pos = 0
    for seg in sample.segment_map.segments:
        boundaries.append((byte_pos, seg.role, seg.step))
        byte_pos += len(text[seg.start : seg.end].encode("utf-8"))
    if byte_pos != total_bytes:
        raise AlignmentGap("segment map does not cover the text")

    ids: list[int] = []
    roles: list[Role] = []
    steps: list[int] = []
    seg_idx = 0
    for tid, start, _ in offsets:
        while seg_idx + 1 < len(boundaries) and boundaries[seg_idx + 1][0] <= start:
            seg_idx += 1
        ids.append(tid)
        roles.append(boundaries[seg_idx][1])
        steps.append(boundaries[seg_idx][2])
    return TokenizedSample(tokens=TokenSequence(ids), roles=roles, steps=steps)


def build_mask(ts: TokenizedSample, obj: Objective) -> LossMask:
    """Supervision bits per token under the given objective."""
    world = obj is Objective.ACTION_AND_WORLD_MODEL
    bits = []
    for role, step in zip(ts.roles, ts.steps):
        if role is Role.ACTION or role is Role.MARKER_OBSERVATION:
            bits.append(1)
        elif world and step > 1 and role in (Role.OBSERVATION_FULL, Role.OBSERVATION_DELTA):
            bits.append(1)
        else:
            bits.append(0)
    return LossMask(bits)
