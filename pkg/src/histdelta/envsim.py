"""Toy text gridworld with a scripted expert and a rollout harness.

A single procedurally generated room with a few colored objects. The
agent sees an egocentric text description (walls and objects within a
forward-facing view box) and acts through a six-action vocabulary. The
rollout loop drives a pluggable policy through the full prompt pipeline:
observe, assemble a budgeted prompt, query, extract and validate the
action, step. Observation phrasing mirrors the formatted-history
fixtures ("a yellow key 2 steps right and 1 step forward", singular
"1 step").
"""

from __future__ import annotations

import enum
import random
import subprocess
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Protocol

from .assembler import AssembledPrompt, PromptRequest, build_prompt
from .diffcore import apply_delta, parse_delta
from .formatting import (
    HistoryFormat,
    MarkerConfig,
    extract_action,
    normalize_action,
    validate_action,
)
from .history import Trajectory
from .tokenizer import TokenizerSpec

ACTIONS = ("turn left", "turn right", "go forward", "pick up", "drop", "toggle")
COLORS = ("red", "green", "blue", "yellow", "purple", "grey")
KINDS = ("key", "ball", "box")

VIEW_FORWARD = 6
VIEW_SIDE = 3

# facing -> (forward vector, right vector); y grows downward
_FRAMES = {
    "N": ((0, -1), (1, 0)),
    "E": ((1, 0), (0, 1)),
    "S": ((0, 1), (-1, 0)),
    "W": ((-1, 0), (0, -1)),
}
_TURN_RIGHT = {"N": "E", "E": "S", "S": "W", "W": "N"}
_TURN_LEFT = {v: k for k, v in _TURN_RIGHT.items()}


class InvalidAction(ValueError):
    pass


class Unsolvable(RuntimeError):
    pass


class Termination(enum.Enum):
    SUCCESS = "success"
    TIMEOUT = "timeout"
    INVALID_ACTIONS = "invalid_actions"


@dataclass(frozen=True)
class GridObject:
    kind: str
    color: str
    x: int
    y: int


@dataclass(frozen=True)
class TaskSpec:
    task_class: str  # "go_to" | "pick_up"
    target_kind: str
    target_color: str

    def instruction(self) -> str:
        verb = "go to" if self.task_class == "go_to" else "pick up"
        return (
            f"Your task is to {verb} the {self.target_color} {self.target_kind}.\n"
            "You can take 6 different actions: turn left, turn right, go forward, "
            "pick up, drop, and toggle."
        )


@dataclass(frozen=True)
class GridState:
    width: int
    height: int
    agent_x: int
    agent_y: int
    facing: str
    objects: tuple[GridObject, ...]
    task: TaskSpec
    carried: GridObject | None = None
    step_count: int = 0
    t_max: int = 200

    def is_wall(self, x: int, y: int) -> bool:
        return x <= 0 or y <= 0 or x >= self.width - 1 or y >= self.height - 1

    def object_at(self, x: int, y: int) -> GridObject | None:
        for obj in self.objects:
            if obj.x == x and obj.y == y:
                return obj
        return None

    def ahead(self) -> tuple[int, int]:
        (fx, fy), _ = _FRAMES[self.facing]
        return self.agent_x + fx, self.agent_y + fy


def _ego(state: GridState, x: int, y: int) -> tuple[int, int]:
    """(forward, lateral) offsets of a cell in the agent's frame."""
    (fx, fy), (rx, ry) = _FRAMES[state.facing]
    dx, dy = x - state.agent_x, y - state.agent_y
    return dx * fx + dy * fy, dx * rx + dy * ry


def _steps(n: int) -> str:
    return f"{n} step" if n == 1 else f"{n} steps"


def _wall_distances(state: GridState) -> dict[str, int]:
    """Perpendicular distance to each wall in the agent's frame."""
    (fx, fy), (rx, ry) = _FRAMES[state.facing]
    x, y, w, h = state.agent_x, state.agent_y, state.width, state.height

    def dist(vx: int, vy: int) -> int:
        if vx > 0:
            return w - 1 - x
        if vx < 0:
            return x
        if vy > 0:
            return h - 1 - y
        return y

    return {
        "forward": dist(fx, fy),
        "right": dist(rx, ry),
        "left": dist(-rx, -ry),
    }


def observe(state: GridState) -> str:
    """Egocentric text view: walls, then visible objects.

    Walls are listed forward, right, left when within the view box
    (forward reach 6, lateral reach 3). Objects are visible inside the
    same box and ordered by distance, then clockwise direction from
    forward, then kind, then color.
    """
    lines: list[str] = []
    walls = _wall_distances(state)
    if walls["forward"] <= VIEW_FORWARD:
        lines.append(f"a wall {_steps(walls['forward'])} forward")
    if walls["right"] <= VIEW_SIDE:
        lines.append(f"a wall {_steps(walls['right'])} right")
    if walls["left"] <= VIEW_SIDE:
        lines.append(f"a wall {_steps(walls['left'])} left")

    def clockwise_bucket(fwd: int, lat: int) -> int:
        if fwd == 0 and lat == 0:
            return -1
        if lat == 0:
            return 0
        if lat > 0:
            return 1 if fwd > 0 else 2
        return 7 if fwd > 0 else 6

    visible = []
    for obj in state.objects:
        fwd, lat = _ego(state, obj.x, obj.y)
        if 0 <= fwd <= VIEW_FORWARD and abs(lat) <= VIEW_SIDE:
            visible.append((abs(fwd) + abs(lat), clockwise_bucket(fwd, lat), obj, fwd, lat))
    visible.sort(key=lambda v: (v[0], v[1], v[2].kind, v[2].color))

    for _, _, obj, fwd, lat in visible:
        parts = []
        if lat != 0:
            parts.append(f"{_steps(abs(lat))} {'right' if lat > 0 else 'left'}")
        if fwd != 0:
            parts.append(f"{_steps(fwd)} forward")
        where = " and ".join(parts) if parts else "here"
        lines.append(f"a {obj.color} {obj.kind} {where}")
    return "\n".join(lines)


def step(state: GridState, action: str) -> GridState:
    """Apply one action; unknown action strings raise InvalidAction."""
    if action not in ACTIONS:
        raise InvalidAction(action)
    nxt = replace(state, step_count=state.step_count + 1)
    if action == "turn left":
        return replace(nxt, facing=_TURN_LEFT[state.facing])
    if action == "turn right":
        return replace(nxt, facing=_TURN_RIGHT[state.facing])
    if action == "go forward":
        ax, ay = state.ahead()
        if state.is_wall(ax, ay) or state.object_at(ax, ay) is not None:
            return nxt
        return replace(nxt, agent_x=ax, agent_y=ay)
    if action == "pick up":
        ax, ay = state.ahead()
        obj = state.object_at(ax, ay)
        if obj is None or state.carried is not None:
            return nxt
        rest = tuple(o for o in state.objects if o is not obj)
        return replace(nxt, objects=rest, carried=obj)
    if action == "drop":
        ax, ay = state.ahead()
        if state.carried is None or state.is_wall(ax, ay) or state.object_at(ax, ay):
            return nxt
        placed = replace(state.carried, x=ax, y=ay)
        return replace(nxt, objects=state.objects + (placed,), carried=None)
    return nxt  # toggle: placeholder no-op


def is_success(state: GridState) -> bool:
    task = state.task
    if task.task_class == "pick_up":
        return (
            state.carried is not None
            and state.carried.kind == task.target_kind
            and state.carried.color == task.target_color
        )
    ax, ay = state.ahead()
    obj = state.object_at(ax, ay)
    return (
        obj is not None
        and obj.kind == task.target_kind
        and obj.color == task.target_color
    )


def reward(state: GridState, termination: Termination) -> float:
    """Time-discounted success reward; zero for any failure."""
    if termination is not Termination.SUCCESS:
        return 0.0
    return 1.0 - 0.9 * state.step_count / state.t_max


def generate_grid(seed: int, t_max: int = 200) -> GridState:
    """Procedurally generate a solvable, not-yet-solved task instance."""
    rng = random.Random(seed)
    width = height = 8
    interior = [(x, y) for x in range(1, width - 1) for y in range(1, height - 1)]
    while True:
        cells = rng.sample(interior, k=3 + rng.randint(0, 2))
        combos = rng.sample([(k, c) for k in KINDS for c in COLORS], k=len(cells) - 1)
        objects = tuple(
            GridObject(kind=k, color=c, x=x, y=y)
            for (k, c), (x, y) in zip(combos, cells[1:])
        )
        target = objects[0]
        task = TaskSpec(
            task_class=rng.choice(["go_to", "pick_up"]),
            target_kind=target.kind,
            target_color=target.color,
        )
        state = GridState(
            width=width,
            height=height,
            agent_x=cells[0][0],
            agent_y=cells[0][1],
            facing=rng.choice("NESW"),
            objects=objects,
            task=task,
            t_max=t_max,
        )
        if is_success(state):
            continue
        try:
            expert_bot(state)
        except Unsolvable:
            continue
        return state


def _plan(state: GridState) -> list[str]:
    """Shortest action plan for the current task via BFS over poses.

    Neighbor expansion prefers moving forward, then turning right, then
    turning left, which fixes tie-breaking among equal-length plans.
    """
    target = next(
        (
            o
            for o in state.objects
            if o.kind == state.task.target_kind and o.color == state.task.target_color
        ),
        None,
    )
    if target is None:
        if state.task.task_class == "pick_up" and is_success(state):
            return []
        raise Unsolvable("target object is not on the grid")

    blocked = {(o.x, o.y) for o in state.objects}

    def facing_target(x: int, y: int, facing: str) -> bool:
        (fx, fy), _ = _FRAMES[facing]
        return (x + fx, y + fy) == (target.x, target.y)

    start = (state.agent_x, state.agent_y, state.facing)
    if facing_target(*start):
        return ["pick up"] if state.task.task_class == "pick_up" else []

    seen = {start}
    queue = deque([(start, [])])
    while queue:
        (x, y, facing), path = queue.popleft()
        for action in ("go forward", "turn right", "turn left"):
            if action == "go forward":
                (fx, fy), _ = _FRAMES[facing]
                nxt = (x + fx, y + fy, facing)
                if state.is_wall(nxt[0], nxt[1]) or (nxt[0], nxt[1]) in blocked:
                    continue
            elif action == "turn right":
                nxt = (x, y, _TURN_RIGHT[facing])
            else:
                nxt = (x, y, _TURN_LEFT[facing])
            if nxt in seen:
                continue
            seen.add(nxt)
            new_path = path + [action]
            if facing_target(*nxt):
                if state.task.task_class == "pick_up":
                    new_path.append("pick up")
                return new_path
            queue.append((nxt, new_path))
    raise Unsolvable("no path to the target")


def expert_bot(state: GridState) -> str:
    """Next action on a shortest path to task completion."""
    plan = _plan(state)
    if not plan:
        return "toggle"  # already done; callers stop on success first
    return plan[0]


@dataclass
class EpisodeRecord:
    trajectory: Trajectory
    reward: float
    termination: Termination


def run_expert_episode(seed: int, t_max: int = 200) -> EpisodeRecord:
    """Roll the scripted expert directly, without the prompt pipeline."""
    state = generate_grid(seed, t_max)
    observations: list[str] = []
    actions: list[str] = []
    while True:
        obs = observe(state)
        action = expert_bot(state)
        state = step(state, action)
        observations.append(obs)
        actions.append(action)
        if is_success(state):
            termination = Termination.SUCCESS
            break
        if state.step_count >= state.t_max:
            termination = Termination.TIMEOUT
            break
    return EpisodeRecord(
        trajectory=Trajectory(
            id=f"grid-{seed}",
            instruction=state.task.instruction(),
            observations=observations,
            actions=actions,
        ),
        reward=reward(state, termination),
        termination=termination,
    )


class PolicyInterface(Protocol):
    def next_continuation(self, prompt: AssembledPrompt) -> str: ...


class ExpertWrapper:
    """State-cheating oracle: ignores the prompt, answers from the grid."""

    def __init__(self, cfg: MarkerConfig = MarkerConfig()):
        self._cfg = cfg
        self._state: GridState | None = None

    def on_state(self, state: GridState) -> None:
        self._state = state

    def next_continuation(self, prompt: AssembledPrompt) -> str:
        assert self._state is not None, "rollout must publish the state first"
        return expert_bot(self._state) + self._cfg.observation_begin


class ReplayPolicy:
    """Replays a recorded action sequence, one per query."""

    def __init__(self, actions: list[str], cfg: MarkerConfig = MarkerConfig()):
        self._actions = list(actions)
        self._cfg = cfg
        self._cursor = 0

    def next_continuation(self, prompt: AssembledPrompt) -> str:
        if self._cursor >= len(self._actions):
            return ""  # exhausted: unterminated empty continuation
        action = self._actions[self._cursor]
        self._cursor += 1
        return action + self._cfg.observation_begin


class ExternalPolicy:
    """Bridges to an external generator over a blank-line text protocol.

    Each exchange writes the prompt text followed by one empty line, then
    reads continuation lines until an empty line. Prompt text must not
    itself contain a blank line. The peer is a subprocess by default;
    `from_streams` attaches to any line-oriented pair instead (e.g. a
    socket's makefile ends).
    """

    def __init__(self, argv: list[str]):
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._writer = self._proc.stdin
        self._reader = self._proc.stdout

    @classmethod
    def from_streams(cls, writer, reader) -> "ExternalPolicy":
        policy = cls.__new__(cls)
        policy._proc = None
        policy._writer = writer
        policy._reader = reader
        return policy

    def next_continuation(self, prompt: AssembledPrompt) -> str:
        if "\n\n" in prompt.text:
            raise ValueError("prompt contains a blank line; wire sentinel would break")
        self._writer.write(prompt.text + "\n\n")
        self._writer.flush()
        lines: list[str] = []
        while True:
            line = self._reader.readline()
            if line == "":
                raise IOError("external policy closed its output stream")
            if line == "\n":
                break
            lines.append(line.rstrip("\n"))
        return "\n".join(lines)

    def close(self) -> None:
        if self._proc is None:
            return
        if self._writer:
            self._writer.close()
        self._proc.terminate()
        self._proc.wait(timeout=5)

    def __enter__(self) -> "ExternalPolicy":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass(frozen=True)
class RolloutConfig:
    format: HistoryFormat = HistoryFormat.DIFF_HISTORY
    h_max: int = 4
    budget: int = 1024
    markers: MarkerConfig = field(default_factory=MarkerConfig)
    t_max: int = 200
    max_invalid: int = 3
    inaction_limit: int | None = None  # consecutive no-state-change steps
    debug_check_anchor: bool = False


def _verify_prompt_anchor(prompt: AssembledPrompt, cfg: MarkerConfig, instruction: str, expected: str) -> None:
    """Check that anchor + deltas in the prompt reproduce the newest observation."""
    head, *pieces = prompt.text.split(cfg.action_begin)
    anchor = head[len(instruction + cfg.instruction_suffix):]
    text = anchor[:-1] if anchor.endswith("\n") else anchor
    for piece in pieces:
        if cfg.observation_begin not in piece:
            continue
        _, block = piece.split(cfg.observation_begin, 1)
        block = block.strip("\n")
        text = apply_delta(text, parse_delta(block, cfg.delta_style))
    if text != expected:
        raise AssertionError("prompt deltas do not reconstruct the current observation")


def rollout(
    env_seed: int,
    policy: PolicyInterface,
    prompt_cfg: RolloutConfig,
    tok: TokenizerSpec,
) -> EpisodeRecord:
    """Drive a policy through the full prompt pipeline for one episode.

    Terminates on task success, on the step budget, or after
    `max_invalid` consecutive invalid or unterminated continuations
    (the counter resets on every valid action).
    """
    state = generate_grid(env_seed, prompt_cfg.t_max)
    instruction = state.task.instruction()
    observations: list[str] = []
    actions: list[str] = []
    invalid = 0
    inaction = 0
    vocab = set(ACTIONS)

    while True:
        obs = observe(state)
        prefix = Trajectory(
            id=f"grid-{env_seed}",
            instruction=instruction,
            observations=observations + [obs],
            actions=list(actions),
        )
        request = PromptRequest(
            trajectory_prefix=prefix,
            h_max=prompt_cfg.h_max,
            budget=prompt_cfg.budget,
            format=prompt_cfg.format,
            cfg=prompt_cfg.markers,
        )
        prompt = build_prompt(request, tok)
        if prompt_cfg.debug_check_anchor and prompt_cfg.format is HistoryFormat.DIFF_HISTORY:
            _verify_prompt_anchor(prompt, prompt_cfg.markers, instruction, obs)

        if hasattr(policy, "on_state"):
            policy.on_state(state)
        continuation = policy.next_continuation(prompt)
        extracted = extract_action(continuation, prompt_cfg.markers)
        if extracted.unterminated or not validate_action(extracted.text, vocab):
            invalid += 1
            if invalid >= prompt_cfg.max_invalid:
                observations.append(obs)
                actions.append(extracted.text)
                termination = Termination.INVALID_ACTIONS
                break
            continue
        invalid = 0
        action = normalize_action(extracted.text)
        before = (state.agent_x, state.agent_y, state.facing, state.objects, state.carried)
        state = step(state, action)
        observations.append(obs)
        actions.append(action)
        after = (state.agent_x, state.agent_y, state.facing, state.objects, state.carried)
        if prompt_cfg.inaction_limit is not None:
            inaction = inaction + 1 if before == after else 0
            if inaction >= prompt_cfg.inaction_limit:
                termination = Termination.TIMEOUT
                break
        if is_success(state):
            termination = Termination.SUCCESS
            break
        if state.step_count >= state.t_max:
            termination = Termination.TIMEOUT
            break

    return EpisodeRecord(
        trajectory=Trajectory(
            id=f"grid-{env_seed}",
            instruction=instruction,
            observations=observations,
            actions=actions,
        ),
        reward=reward(state, termination),
        termination=termination,
    )
