import pytest

from histdelta.diffcore import DeltaStyle
from histdelta.formatting import (
    HistoryFormat,
    MarkerCollision,
    MarkerConfig,
    Role,
    extract_action,
    render_history,
    render_sample,
    validate_action,
)
from histdelta.history import Window, to_diff_history

GRID_ACTIONS = {"turn left", "turn right", "go forward", "pick up", "drop", "toggle"}


class TestRenderSample:
    def test_e1_diff_golden(self, e1_window, e1_diff_golden):
        rendered = render_sample(to_diff_history(e1_window))
        assert rendered.text == e1_diff_golden
        assert rendered.format is HistoryFormat.DIFF_HISTORY

    def test_e1_full_golden(self, e1_window, e1_full_golden):
        rendered = render_sample(e1_window)
        assert rendered.text == e1_full_golden
        assert rendered.format is HistoryFormat.FULL_TEXT

    def test_single_step_layout(self):
        w = Window("find the ball", 0, [("a red ball here", "pick up")])
        rendered = render_sample(w)
        assert rendered.text == "find the ball\na red ball here\n<|action|>pick up\n"
        roles = [s.role for s in rendered.segment_map.segments]
        assert roles == [Role.INSTRUCTION, Role.OBSERVATION_FULL, Role.MARKER_ACTION, Role.ACTION]

    def test_single_step_with_terminator(self):
        w = Window("find the ball", 0, [("a red ball here", "pick up")])
        rendered = render_sample(w, terminate_final_action=True)
        assert rendered.text.endswith("<|action|>pick up\n<|observation|>")
        assert rendered.segment_map.segments[-1].role is Role.MARKER_OBSERVATION

    def test_trailing_action_marker(self, e1_window):
        rendered = render_sample(e1_window, include_trailing_action_marker=True)
        assert rendered.text.endswith("<|action|>")
        assert rendered.segment_map.segments[-1].role is Role.MARKER_ACTION

    def test_segment_coverage(self, e1_window):
        for view in (e1_window, to_diff_history(e1_window)):
            rendered = render_sample(view)
            assert "".join(rendered.segment_map.texts(rendered.text)) == rendered.text

    def test_grammar_alternation(self, e1_window):
        rendered = render_sample(to_diff_history(e1_window))
        segs = rendered.segment_map.segments
        for i, seg in enumerate(segs):
            if seg.role is Role.ACTION:
                assert segs[i - 1].role is Role.MARKER_ACTION
                if i + 1 < len(segs):
                    assert segs[i + 1].role is Role.MARKER_OBSERVATION
            if seg.role is Role.OBSERVATION_DELTA:
                assert segs[i - 1].role is Role.MARKER_OBSERVATION

    def test_delta_roles_tagged(self, e1_window):
        rendered = render_sample(to_diff_history(e1_window))
        roles = {s.role for s in rendered.segment_map.segments}
        assert Role.OBSERVATION_DELTA in roles
        # anchor stays full text
        first_obs = [s for s in rendered.segment_map.segments if s.step == 1 and "observation" in s.role.value]
        assert first_obs[0].role is Role.OBSERVATION_FULL

    def test_determinism(self, e1_window):
        a = render_sample(to_diff_history(e1_window))
        b = render_sample(to_diff_history(e1_window))
        assert a.text == b.text and a.segment_map == b.segment_map

    def test_empty_delta_renders_bare_marker_line(self):
        w = Window("task", 0, [("same", "a"), ("same", "b")])
        rendered = render_sample(to_diff_history(w))
        assert "<|observation|>\n<|action|>" in rendered.text

    def test_marker_collision_rejected(self):
        w = Window("task", 0, [("contains <|action|> inside", "go")])
        with pytest.raises(MarkerCollision) as err:
            render_sample(w)
        assert err.value.role is Role.OBSERVATION_FULL

    def test_custom_delimiter_flows_to_deltas(self, e1_window):
        cfg = MarkerConfig(delta_style=DeltaStyle(hunk_delimiter="<|@@|>"))
        rendered = render_sample(to_diff_history(e1_window), cfg)
        assert "<|@@|> -2 +2 <|@@|>" in rendered.text

    def test_prompt_mode_via_render_history(self):
        blocks = [(Role.OBSERVATION_FULL, "obs one"), (Role.OBSERVATION_FULL, "obs two")]
        rendered = render_history(
            "task", blocks, ["go forward"], MarkerConfig(), HistoryFormat.FULL_TEXT,
            trailing_action_marker=True,
        )
        assert rendered.text == (
            "task\nobs one\n<|action|>go forward\n<|observation|>\nobs two\n<|action|>"
        )


class TestExtractAction:
    def test_terminated(self):
        got = extract_action("go forward<|observation|>\nleftover")
        assert got.text == "go forward" and not got.unterminated

    def test_empty_action(self):
        got = extract_action("<|observation|>")
        assert got.text == "" and not got.unterminated

    def test_unterminated(self):
        got = extract_action("northeast")
        assert got.text == "northeast" and got.unterminated

    def test_whitespace_trimmed(self):
        got = extract_action("  turn left \n<|observation|>")
        assert got.text == "turn left"

    def test_render_extract_inverse(self):
        for action in sorted(GRID_ACTIONS):
            got = extract_action(f"{action}<|observation|>")
            assert got.text == action and not got.unterminated


class TestValidateAction:
    def test_members(self):
        assert validate_action("turn left", GRID_ACTIONS)
        assert not validate_action("fly", GRID_ACTIONS)

    def test_whitespace_normalization(self):
        assert validate_action("  pick up ", GRID_ACTIONS)
        assert validate_action("pick  up", GRID_ACTIONS)

    def test_empty_vocabulary_rejected(self):
        with pytest.raises(ValueError):
            validate_action("x", set())
