import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histdelta.diffcore import Delta, PatchConflict
from histdelta.history import (
    OutOfRange,
    Trajectory,
    Window,
    rebase,
    to_diff_history,
    to_full_history,
)


def make_trajectory(rng: random.Random, steps: int, lines: int = 8) -> Trajectory:
    pool = [f"entity {i} nearby" for i in range(12)]
    obs = []
    doc = [rng.choice(pool) for _ in range(lines)]
    for _ in range(steps):
        for _ in range(rng.randint(0, 3)):
            op = rng.random()
            if op < 0.4 and doc:
                doc[rng.randrange(len(doc))] = rng.choice(pool)
            elif op < 0.7:
                doc.insert(rng.randint(0, len(doc)), rng.choice(pool))
            elif doc:
                doc.pop(rng.randrange(len(doc)))
        obs.append("\n".join(doc))
    actions = [rng.choice(["go forward", "turn left", "turn right"]) for _ in range(steps)]
    return Trajectory(id="t", instruction="do the thing", observations=obs, actions=actions)


class TestRebase:
    def test_whole_trajectory(self):
        t = make_trajectory(random.Random(0), 6)
        w = rebase(t, 0, 6)
        assert w.start == 0 and w.horizon == 6
        assert [o for o, _ in w.steps] == t.observations

    def test_mid_slice(self):
        t = make_trajectory(random.Random(1), 6)
        w = rebase(t, 3, 2)
        assert [o for o, _ in w.steps] == t.observations[3:5]
        assert [a for _, a in w.steps] == t.actions[3:5]

    def test_out_of_range(self):
        t = make_trajectory(random.Random(2), 6)
        with pytest.raises(OutOfRange):
            rebase(t, 5, 4)
        with pytest.raises(OutOfRange):
            rebase(t, -1, 2)
        with pytest.raises(OutOfRange):
            rebase(t, 0, 0)


class TestDiffHistory:
    def test_single_step_has_empty_tail(self):
        w = Window("go", 0, [("obs text", "act")])
        d = to_diff_history(w)
        assert d.anchor_observation == "obs text"
        assert d.first_action == "act"
        assert d.tail == []
        assert to_full_history(d) == w

    def test_identical_observations_yield_empty_delta(self):
        w = Window("go", 0, [("same\nlines", "a"), ("same\nlines", "b")])
        d = to_diff_history(w)
        assert d.tail[0][0] == Delta([])

    def test_anchor_is_raw_observation(self):
        t = make_trajectory(random.Random(3), 5)
        w = rebase(t, 2, 3)
        d = to_diff_history(w)
        assert d.anchor_observation == t.observations[2]

    def test_action_order_preserved(self):
        t = make_trajectory(random.Random(4), 7)
        w = rebase(t, 0, 7)
        d = to_diff_history(w)
        assert [d.first_action] + [a for _, a in d.tail] == t.actions

    def test_corrupted_tail_conflicts(self):
        t = make_trajectory(random.Random(5), 4)
        w = rebase(t, 0, 4)
        d = to_diff_history(w)
        d.anchor_observation = "something\nelse entirely\nunrelated"
        conflicted = False
        try:
            recovered = to_full_history(d)
            conflicted = recovered != w
        except PatchConflict:
            conflicted = True
        assert conflicted

    def test_bijection_bulk(self):
        rng = random.Random(12)
        for _ in range(200):
            t = make_trajectory(rng, rng.randint(1, 10))
            start = rng.randint(0, t.length - 1)
            h = rng.randint(1, t.length - start)
            w = rebase(t, start, h)
            assert to_full_history(to_diff_history(w)) == w


@given(data=st.data())
@settings(max_examples=150, deadline=None)
def test_bijection_property(data):
    pool = [f"row {i}" for i in range(6)]
    steps = data.draw(
        st.lists(
            st.tuples(
                st.lists(st.sampled_from(pool), max_size=6).map("\n".join),
                st.sampled_from(["left", "right", "fwd"]),
            ),
            min_size=1,
            max_size=6,
        )
    )
    w = Window("task", 0, steps)
    assert to_full_history(to_diff_history(w)) == w
