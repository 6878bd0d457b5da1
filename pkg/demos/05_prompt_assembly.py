"""Token-budgeted prompt assembly with horizon backtracking.

The builder renders the last h' steps (anchor as full text, later
observations as deltas recomputed from raw text) and walks h' down from
its maximum until the encoded prompt fits the budget. The prompt always
ends with the action marker, priming an external generator.

Run:  python demos/05_prompt_assembly.py
"""

from histdelta import PromptRequest, Trajectory, build_prompt
from histdelta.assembler import BudgetExhausted
from histdelta.formatting import MarkerConfig
from histdelta.tokenizer import WhitespaceTokenizer, register_special_tokens

prefix = Trajectory(
    id="demo",
    instruction="reach the goal tile",
    observations=[
        "tile 1 dark\ntile 2 dark\ntile 3 dark",
        "tile 1 lit\ntile 2 dark\ntile 3 dark",
        "tile 1 lit\ntile 2 lit\ntile 3 dark",
        "tile 1 lit\ntile 2 lit\ntile 3 lit",
    ],
    actions=["step", "step", "step"],  # newest observation awaits its action
)

tok = register_special_tokens(
    WhitespaceTokenizer(), list(MarkerConfig().markers)
)

for budget in (4096, 120, 80, 50):
    request = PromptRequest(trajectory_prefix=prefix, h_max=4, budget=budget)
    try:
        prompt = build_prompt(request, tok)
    except BudgetExhausted:
        print(f"budget {budget:>5}: exhausted (even one step does not fit)")
        continue
    print(f"budget {budget:>5}: chosen_h={prompt.chosen_h}, tokens={len(prompt.tokens)}")
    assert prompt.text.endswith("<|action|>")

# An opt-in degraded mode right-truncates a single-step prompt instead of
# failing, keeping the trailing action marker.
prompt = build_prompt(
    PromptRequest(trajectory_prefix=prefix, h_max=4, budget=20),
    tok,
    allow_truncated_fallback=True,
)
print(f"degraded fallback: {len(prompt.tokens)} tokens, still ends with the marker:",
      prompt.text.endswith("<|action|>"))
