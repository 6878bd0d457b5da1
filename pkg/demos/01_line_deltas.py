"""Line deltas between texts: compute, render, parse, apply, invert.

Run:  python demos/01_line_deltas.py
"""

from histdelta import apply_delta, compute_delta, invert_delta, parse_delta, render_delta
from histdelta.diffcore import DeltaStyle

old = "Orange\nBanana\nMango"
new = "Orange\nApple\nMango"

# A delta is a list of zero-context hunks: removed/added lines at
# 1-based coordinates. Equal texts give an empty delta.
delta = compute_delta(old, new)
print("structural form:", delta.hunks)

# The rendered form is what goes into prompts: a header per hunk, then
# the removed lines ("-") and added lines ("+"). Counts of 1 are omitted
# from headers.
print("\nrendered:")
print(render_delta(delta))

# Rendering is invertible, and applying the delta reproduces the new text.
assert parse_delta(render_delta(delta)) == delta
assert apply_delta(old, delta) == new

# diff is not commutative; inversion gives the delta for the other direction.
backwards = invert_delta(delta)
assert apply_delta(new, backwards) == old
print("\ninverted:")
print(render_delta(backwards))

# The hunk delimiter is configurable, e.g. for marker-style prompts.
style = DeltaStyle(hunk_delimiter="<|@@|>")
print("\ncustom delimiter:")
print(render_delta(delta, style))
