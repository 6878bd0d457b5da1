"""Interaction histories: full-text windows vs delta-form windows.

A window keeps its oldest observation as full text (the anchor); every
later observation becomes the line delta against its predecessor. The
conversion is lossless in both directions.

Run:  python demos/02_history_conversion.py
"""

from histdelta import Trajectory, rebase, to_diff_history, to_full_history

trajectory = Trajectory(
    id="demo",
    instruction="Your task is to go to the yellow key.",
    observations=[
        "a wall 4 steps forward\na wall 3 steps left",
        "a wall 4 steps forward\na wall 3 steps right",
        "a wall 3 steps forward\na wall 3 steps right\na yellow key 2 steps right and 2 steps forward",
    ],
    actions=["turn right", "turn right", "go forward"],
)

window = rebase(trajectory, 0, 3)
dw = to_diff_history(window)

print("anchor (kept as full text):")
print(dw.anchor_observation)
print("\ndelta slots:", len(dw.tail))
for delta, action in dw.tail:
    print(f"  after {action!r}: {len(delta.hunks)} hunk(s)")

# Reconstruction replays the deltas off the anchor.
assert to_full_history(dw) == window
print("\nround trip exact: True")

# Rebasing a shorter slice recomputes a fresh anchor from raw text, so a
# shrunken history never depends on observations outside its slice.
short = rebase(trajectory, 1, 2)
assert to_diff_history(short).anchor_observation == trajectory.observations[1]
print("rebased anchor is the raw observation: True")
