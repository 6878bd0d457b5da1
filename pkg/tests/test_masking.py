import random

import pytest

from histdelta.formatting import MarkerConfig, Role, render_sample
from histdelta.history import Window, to_diff_history
from histdelta.masking import (
    AlignmentGap,
    Objective,
    TokenizedSample,
    align_segments,
    build_mask,
)
from histdelta.tokenizer import TokenSequence


def make_window(rng: random.Random, steps: int) -> Window:
    pool = [f"thing {i} ahead" for i in range(10)]
    doc = [rng.choice(pool) for _ in range(rng.randint(1, 6))]
    obs = []
    for _ in range(steps):
        if doc and rng.random() < 0.7:
            doc[rng.randrange(len(doc))] = rng.choice(pool)
        obs.append("\n".join(doc))
    actions = [rng.choice(["go forward", "turn left", "pick up"]) for _ in range(steps)]
    return Window("solve it", 0, list(zip(obs, actions)))


class TestAlignSegments:
    def test_roles_projected(self, ws_tok):
        w = Window("do it", 0, [("a thing here", "pick up")])
        rendered = render_sample(w, terminate_final_action=True)
        ts = align_segments(rendered, ws_tok)
        assert len(ts.roles) == len(ts.tokens)
        # instruction tokens first, marker_observation token last
        assert ts.roles[0] is Role.INSTRUCTION
        assert ts.roles[-1] is Role.MARKER_OBSERVATION
        assert Role.ACTION in ts.roles and Role.MARKER_ACTION in ts.roles

    def test_delta_tokens_carry_delta_role(self, ws_tok, e1_window):
        rendered = render_sample(to_diff_history(e1_window))
        ts = align_segments(rendered, ws_tok)
        assert Role.OBSERVATION_DELTA in ts.roles
        # every token decodes back into the right span
        assert ws_tok.decode(ts.tokens) == rendered.text

    def test_empty_action_has_zero_action_tokens(self, ws_tok):
        w = Window("task", 0, [("obs", "")])
        rendered = render_sample(w, terminate_final_action=True)
        ts = align_segments(rendered, ws_tok)
        # the action slot holds only the structural newline
        action_tokens = [t for t, r in zip(ts.tokens.ids, ts.roles) if r is Role.ACTION]
        assert ws_tok.decode(action_tokens) == "\n"

    def test_steps_tagged(self, ws_tok, e1_window):
        rendered = render_sample(to_diff_history(e1_window))
        ts = align_segments(rendered, ws_tok)
        obs_steps = {
            s for s, r in zip(ts.steps, ts.roles)
            if r in (Role.OBSERVATION_FULL, Role.OBSERVATION_DELTA)
        }
        assert obs_steps == {1, 2, 3, 4, 5, 6}


class TestBuildMask:
    def test_single_step_action_only_sum(self, ws_tok):
        w = Window("task words here", 0, [("one two three", "pick up")])
        rendered = render_sample(w, terminate_final_action=True)
        ts = align_segments(rendered, ws_tok)
        mask = build_mask(ts, Objective.ACTION_ONLY)
        action_tokens = sum(r is Role.ACTION for r in ts.roles)
        assert mask.supervised == action_tokens + 1

    def test_hand_enumerated_two_step(self, ws_tok):
        w = Window("do", 0, [("a b", "go"), ("a c", "stop")])
        rendered = render_sample(w, terminate_final_action=True)
        ts = align_segments(rendered, ws_tok)
        # text: "do\n" "a b\n" <a> "go\n" <o> "\na c\n" <a> "stop\n" <o>
        decoded = [ws_tok.decode([t]) for t in ts.tokens.ids]
        assert decoded == [
            "do", "\n", "a", " ", "b", "\n", "<|action|>", "go", "\n",
            "<|observation|>", "\n", "a", " ", "c", "\n", "<|action|>",
            "stop", "\n", "<|observation|>",
        ]
        mask = build_mask(ts, Objective.ACTION_ONLY)
        assert mask.bits == [
            0, 0, 0, 0, 0, 0, 0, 1, 1,
            1, 0, 0, 0, 0, 0, 0,
            1, 1, 1,
        ]
        world = build_mask(ts, Objective.ACTION_AND_WORLD_MODEL)
        assert world.bits == [
            0, 0, 0, 0, 0, 0, 0, 1, 1,
            1, 1, 1, 1, 1, 1, 0,
            1, 1, 1,
        ]

    def test_world_model_supervises_later_observations(self, ws_tok, e1_window):
        rendered = render_sample(to_diff_history(e1_window), terminate_final_action=True)
        ts = align_segments(rendered, ws_tok)
        world = build_mask(ts, Objective.ACTION_AND_WORLD_MODEL)
        for bit, role, step in zip(world.bits, ts.roles, ts.steps):
            if role is Role.OBSERVATION_DELTA:
                assert bit == 1 and step > 1

    def test_first_observation_never_supervised(self, ws_tok, e1_window):
        for view in (e1_window, to_diff_history(e1_window)):
            rendered = render_sample(view, terminate_final_action=True)
            ts = align_segments(rendered, ws_tok)
            for obj in Objective:
                mask = build_mask(ts, obj)
                for bit, role, step in zip(mask.bits, ts.roles, ts.steps):
                    if step == 1 and role is Role.OBSERVATION_FULL:
                        assert bit == 0

    def test_world_dominates_action_only(self, ws_tok):
        rng = random.Random(3)
        for _ in range(100):
            w = make_window(rng, rng.randint(1, 5))
            rendered = render_sample(to_diff_history(w), terminate_final_action=True)
            ts = align_segments(rendered, ws_tok)
            ao = build_mask(ts, Objective.ACTION_ONLY)
            wm = build_mask(ts, Objective.ACTION_AND_WORLD_MODEL)
            assert all(a <= b for a, b in zip(ao.bits, wm.bits))

    def test_mask_sum_identity_bulk(self, ws_tok):
        rng = random.Random(4)
        for _ in range(200):
            w = make_window(rng, rng.randint(1, 6))
            rendered = render_sample(to_diff_history(w), terminate_final_action=True)
            ts = align_segments(rendered, ws_tok)
            mask = build_mask(ts, Objective.ACTION_ONLY)
            action_tokens = sum(r is Role.ACTION for r in ts.roles)
            terminators = sum(r is Role.MARKER_OBSERVATION for r in ts.roles)
            assert terminators == w.horizon
            assert mask.supervised == action_tokens + terminators

    def test_marker_action_is_prompt(self, ws_tok, e1_window):
        rendered = render_sample(e1_window, terminate_final_action=True)
        ts = align_segments(rendered, ws_tok)
        for obj in Objective:
            mask = build_mask(ts, obj)
            for bit, role in zip(mask.bits, ts.roles):
                if role is Role.MARKER_ACTION:
                    assert bit == 0

    def test_delimiter_change_keeps_role_rules(self, ws_tok, e1_window):
        from histdelta.diffcore import DeltaStyle

        cfg = MarkerConfig(delta_style=DeltaStyle(hunk_delimiter="<|@@|>"))
        rendered = render_sample(to_diff_history(e1_window), cfg, terminate_final_action=True)
        ts = align_segments(rendered, ws_tok)
        mask = build_mask(ts, Objective.ACTION_ONLY)
        for bit, role in zip(mask.bits, ts.roles):
            assert bit == (1 if role in (Role.ACTION, Role.MARKER_OBSERVATION) else 0)


class TestAlignmentGap:
    def test_gappy_offsets_rejected(self, e1_window, ws_tok):
        class SkippyTokenizer:
            special_tokens = ws_tok.special_tokens

            def encode_with_offsets(self, text):
                offs = ws_tok.encode_with_offsets(text)
                return offs[:1] + offs[2:]  # drop a token: coverage gap

        rendered = render_sample(e1_window)
        with pytest.raises(AlignmentGap):
            align_segments(rendered, SkippyTokenizer())


def test_bpe_alignment_matches_whitespace_semantics(bpe_tok_markers, ws_tok, e1_window):
    rendered = render_sample(to_diff_history(e1_window), terminate_final_action=True)
    for tok in (bpe_tok_markers, ws_tok):
        ts = align_segments(rendered, tok)
        mask = build_mask(ts, Objective.ACTION_ONLY)
        action_tokens = sum(r is Role.ACTION for r in ts.roles)
        terminators = sum(r is Role.MARKER_OBSERVATION for r in ts.roles)
        assert mask.supervised == action_tokens + terminators
