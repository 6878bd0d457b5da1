import random

import pytest

from histdelta.assembler import BudgetExhausted, PromptRequest, build_prompt, fit_check
from histdelta.formatting import HistoryFormat, MarkerConfig
from histdelta.history import Trajectory


def make_prefix(rng: random.Random, steps: int, lines: int = 4) -> Trajectory:
    pool = [f"marker {i} seen" for i in range(10)]
    doc = [rng.choice(pool) for _ in range(lines)]
    obs = []
    for _ in range(steps):
        if rng.random() < 0.8:
            doc[rng.randrange(len(doc))] = rng.choice(pool)
        obs.append("\n".join(doc))
    actions = [rng.choice(["go forward", "turn left"]) for _ in range(steps - 1)]
    return Trajectory(id="p", instruction="reach the goal", observations=obs, actions=actions)


def request(prefix, h_max=8, budget=10**6, fmt=HistoryFormat.DIFF_HISTORY):
    return PromptRequest(trajectory_prefix=prefix, h_max=h_max, budget=budget, format=fmt)


class TestFitCheck:
    def test_threshold_scan(self):
        assert fit_check([30, 20, 12], instruction_tokens=5, budget=26) == 2

    def test_no_fit_returns_zero(self):
        assert fit_check([30, 20, 12], instruction_tokens=5, budget=10) == 0

    def test_non_monotone_counts_first_fit_from_top(self):
        # re-anchoring can make a longer horizon cheaper than a shorter one
        assert fit_check([40, 44, 12], instruction_tokens=5, budget=45) == 3


class TestBuildPrompt:
    def test_huge_budget_takes_full_horizon(self, ws_tok):
        prefix = make_prefix(random.Random(0), 5)
        prompt = build_prompt(request(prefix, h_max=8), ws_tok)
        assert prompt.chosen_h == 5

    def test_h_max_caps_horizon(self, ws_tok):
        prefix = make_prefix(random.Random(1), 6)
        prompt = build_prompt(request(prefix, h_max=2), ws_tok)
        assert prompt.chosen_h == 2

    def test_budget_safety_and_terminal_marker(self, ws_tok, markers):
        rng = random.Random(2)
        for _ in range(60):
            prefix = make_prefix(rng, rng.randint(1, 6))
            budget = rng.randint(40, 400)
            try:
                prompt = build_prompt(request(prefix, budget=budget), ws_tok)
            except BudgetExhausted:
                continue
            assert len(prompt.tokens) <= budget
            assert prompt.text.endswith(markers.action_begin)
            assert prompt.tokens.ids[-1] == ws_tok.special_tokens[markers.action_begin]

    def test_hand_counted_backtrack(self, ws_tok):
        # build a prefix whose rendered candidates have known token counts,
        # then pin the chosen horizon against by-hand encoding
        prefix = make_prefix(random.Random(3), 3)
        full = build_prompt(request(prefix), ws_tok)
        assert full.chosen_h == 3
        for h in (3, 2, 1):
            req = request(prefix, h_max=h)
            exact = build_prompt(req, ws_tok)
            count_h = len(exact.tokens)
            smaller = build_prompt(request(prefix, h_max=h, budget=count_h), ws_tok)
            assert smaller.chosen_h == h
            if h > 1:
                shrunk = build_prompt(request(prefix, h_max=h, budget=count_h - 1), ws_tok)
                assert shrunk.chosen_h < h

    def test_budget_monotonicity(self, ws_tok):
        rng = random.Random(4)
        for _ in range(25):
            prefix = make_prefix(rng, rng.randint(2, 6))
            req_budgets = sorted(rng.sample(range(30, 600), 6))
            last_h = 0
            for budget in req_budgets:
                try:
                    prompt = build_prompt(request(prefix, budget=budget), ws_tok)
                    h = prompt.chosen_h
                except BudgetExhausted:
                    h = 0
                assert h >= last_h
                last_h = h

    def test_budget_exhausted_exactly_when_single_step_misses(self, ws_tok):
        rng = random.Random(5)
        for _ in range(40):
            prefix = make_prefix(rng, rng.randint(1, 4))
            single = build_prompt(request(prefix, h_max=1), ws_tok)
            floor = len(single.tokens)
            assert build_prompt(request(prefix, budget=floor), ws_tok).chosen_h >= 1
            with pytest.raises(BudgetExhausted):
                build_prompt(request(prefix, budget=floor - 1), ws_tok)

    def test_tiny_budget_raises(self, ws_tok):
        prefix = make_prefix(random.Random(6), 2)
        with pytest.raises(BudgetExhausted):
            build_prompt(request(prefix, budget=3), ws_tok)

    def test_degraded_fallback(self, ws_tok, markers):
        prefix = make_prefix(random.Random(7), 2)
        prompt = build_prompt(request(prefix, budget=5), ws_tok, allow_truncated_fallback=True)
        assert prompt.degraded and prompt.chosen_h == 1
        assert len(prompt.tokens) <= 5
        assert prompt.tokens.ids[-1] == ws_tok.special_tokens[markers.action_begin]
        assert prompt.text.endswith(markers.action_begin)

    def test_anchor_reconstructs_current_observation(self, ws_tok):
        from histdelta.diffcore import apply_delta, compute_delta

        rng = random.Random(8)
        prefix = make_prefix(rng, 5)
        prompt = build_prompt(request(prefix, h_max=3), ws_tok)
        anchor = prefix.observations[-prompt.chosen_h]
        assert anchor in prompt.text
        text = anchor
        for a, b in zip(
            prefix.observations[-prompt.chosen_h:], prefix.observations[-prompt.chosen_h + 1:]
        ):
            text = apply_delta(text, compute_delta(a, b))
        assert text == prefix.observations[-1]

    def test_aligned_prefix_rejected(self, ws_tok):
        bad = Trajectory(id="x", instruction="i", observations=["a"], actions=["go"])
        with pytest.raises(ValueError):
            build_prompt(request(bad), ws_tok)

    def test_unregistered_markers_rejected(self):
        from histdelta.tokenizer import WhitespaceTokenizer

        prefix = make_prefix(random.Random(9), 2)
        with pytest.raises(ValueError):
            build_prompt(request(prefix), WhitespaceTokenizer())

    def test_full_text_format(self, ws_tok):
        prefix = make_prefix(random.Random(10), 3)
        prompt = build_prompt(request(prefix, fmt=HistoryFormat.FULL_TEXT), ws_tok)
        for obs in prefix.observations:
            assert obs in prompt.text
