"""The toy gridworld and the evaluation loop.

Runs the scripted expert directly, then replays it through the full
delta-history prompt pipeline (observe, assemble, query, extract,
validate, step) and checks both paths agree step for step. Equivalent
CLI:  histdelta rollout --episodes 8 --format diff

Run:  python demos/06_gridworld_rollout.py
"""

import statistics

from histdelta.envsim import (
    ExpertWrapper,
    RolloutConfig,
    Termination,
    generate_grid,
    observe,
    rollout,
    run_expert_episode,
)
from histdelta.formatting import HistoryFormat, MarkerConfig
from histdelta.tokenizer import WhitespaceTokenizer, register_special_tokens

state = generate_grid(seed=4)
print(state.task.instruction())
print("\nfirst observation:")
print(observe(state))

markers = MarkerConfig()
tok = register_special_tokens(WhitespaceTokenizer(), list(markers.markers))
cfg = RolloutConfig(
    format=HistoryFormat.DIFF_HISTORY,
    h_max=4,
    budget=1024,
    debug_check_anchor=True,  # re-derive the newest observation from the prompt each step
)

rewards = []
for seed in range(8):
    direct = run_expert_episode(seed)
    piped = rollout(seed, ExpertWrapper(markers), cfg, tok)
    assert piped.trajectory == direct.trajectory, "prompt pipeline must be transparent"
    assert piped.termination is Termination.SUCCESS
    rewards.append(piped.reward)
    print(f"seed {seed}: {len(piped.trajectory.actions)} steps, reward {piped.reward:.3f}")

print(f"\nmean reward: {statistics.fmean(rewards):.3f}")

# An ill-behaved policy terminates after three consecutive invalid actions.
class Chaotic:
    def next_continuation(self, prompt):
        return "cast fireball" + markers.observation_begin

record = rollout(0, Chaotic(), cfg, tok)
print("chaotic policy:", record.termination.value, "reward", record.reward)
