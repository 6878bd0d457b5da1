"""Interaction-history data model and full-text/delta-form conversion.

A Trajectory is an instruction plus aligned observation/action sequences.
A Window is a horizon slice of one; its delta form keeps the oldest
observation as full text (the anchor) and replaces each later observation
with the line delta against its predecessor. Conversion is lossless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diffcore import Delta, apply_delta, compute_delta


class OutOfRange(IndexError):
    """Raised when a window slice exceeds its source trajectory."""


@dataclass
class Trajectory:
    """Instruction plus T aligned (observation, action) steps.

    The prompt assembler also accepts prefixes carrying one more
    observation than actions (the step awaiting an action); `validate`
    checks the aligned form used by datasets.
    """

    id: str
    instruction: str
    observations: list[str]
    actions: list[str]

    def validate(self) -> None:
        if not self.instruction:
            raise ValueError("instruction must be non-empty")
        if len(self.observations) != len(self.actions):
            raise ValueError(
                f"{len(self.observations)} observations vs {len(self.actions)} actions"
            )
        if not self.observations:
            raise ValueError("trajectory must have at least one step")

    @property
    def length(self) -> int:
        return len(self.actions)


@dataclass
class Window:
    """A horizon-h slice of a trajectory, in full-text form."""

    instruction: str
    start: int
    steps: list[tuple[str, str]]  # (observation, action)

    def validate(self) -> None:
        if not self.steps:
            raise ValueError("window must contain at least one step")
        if self.start < 0:
            raise ValueError("window start must be non-negative")

    @property
    def horizon(self) -> int:
        return len(self.steps)


@dataclass
class DiffWindow:
    """A window with every post-anchor observation stored as a Delta."""

    instruction: str
    start: int
    anchor_observation: str
    first_action: str
    tail: list[tuple[Delta, str]] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return 1 + len(self.tail)


def rebase(t: Trajectory, new_start: int, h: int) -> Window:
    """Slice steps [new_start, new_start+h) out of a trajectory.

    Used to recompute a fresh full-text anchor when a shorter horizon is
    needed; raises OutOfRange when the slice does not fit.
    """
    t.validate()
    if h < 1:
        raise OutOfRange(f"horizon must be >= 1, got {h}")
    if new_start < 0 or new_start + h > t.length:
        raise OutOfRange(
            f"window [{new_start}, {new_start + h}) exceeds trajectory of length {t.length}"
        )
    steps = list(zip(t.observations[new_start : new_start + h], t.actions[new_start : new_start + h]))
    return Window(instruction=t.instruction, start=new_start, steps=steps)


def to_diff_history(w: Window) -> DiffWindow:
    """Replace every observation after the first with its delta."""
    w.validate()
    anchor, first_action = w.steps[0]
    tail = [
        (compute_delta(w.steps[k][0], w.steps[k + 1][0]), w.steps[k + 1][1])
        for k in range(len(w.steps) - 1)
    ]
    return DiffWindow(
        instruction=w.instruction,
        start=w.start,
        anchor_observation=anchor,
        first_action=first_action,
        tail=tail,
    )


def to_full_history(d: DiffWindow) -> Window:
    """Reconstruct the full-text window by chaining deltas off the anchor.

    Propagates PatchConflict if a delta does not apply to the text built
    so far (an internally inconsistent DiffWindow).
    """
    steps = [(d.anchor_observation, d.first_action)]
    text = d.anchor_observation
    for delta, action in d.tail:
        text = apply_delta(text, delta)
        steps.append((text, action))
    return Window(instruction=d.instruction, start=d.start, steps=steps)
