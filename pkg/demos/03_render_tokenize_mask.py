"""From a window to a supervised training sample.

Rendering inserts the action/observation markers and tracks a segment
map of role-tagged spans; tokenization projects roles onto tokens; the
mask selects which token positions a training loop should supervise.

Run:  python demos/03_render_tokenize_mask.py
"""

from histdelta import (
    Objective,
    Trajectory,
    align_segments,
    build_mask,
    rebase,
    render_sample,
    to_diff_history,
)
from histdelta.formatting import Role
from histdelta.tokenizer import WhitespaceTokenizer, register_special_tokens

trajectory = Trajectory(
    id="demo",
    instruction="reach the box",
    observations=["a red box 2 steps forward", "a red box 1 step forward"],
    actions=["go forward", "go forward"],
)
window = rebase(trajectory, 0, 2)

# terminate_final_action brackets every action between the two markers,
# the dataset layout; the observation marker doubles as the stop signal.
rendered = render_sample(to_diff_history(window), terminate_final_action=True)
print(rendered.text)

tok = register_special_tokens(WhitespaceTokenizer(), ["<|action|>", "<|observation|>"])
ts = align_segments(rendered, tok)

action_only = build_mask(ts, Objective.ACTION_ONLY)
world_model = build_mask(ts, Objective.ACTION_AND_WORLD_MODEL)

print(f"{'token':<18} {'role':<20} act world")
for tid, role, ao, wm in zip(ts.tokens.ids, ts.roles, action_only.bits, world_model.bits):
    token = tok.decode([tid]).replace("\n", "\\n")
    print(f"{token:<18} {role.value:<20} {ao}    {wm}")

# Action-only supervises action tokens plus each closing observation
# marker; the world-model objective additionally supervises observation
# and delta tokens from step 2 onward. The anchor is never supervised.
assert all(a <= b for a, b in zip(action_only.bits, world_model.bits))
first_obs_bits = [
    b for b, r, s in zip(world_model.bits, ts.roles, ts.steps)
    if s == 1 and r is Role.OBSERVATION_FULL
]
assert not any(first_obs_bits)
