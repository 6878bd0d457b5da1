"""Line-level text deltas: compute, render, parse, apply, invert.

Deltas are zero-context: only removed/added lines are kept, grouped into
hunks addressed by 1-based line coordinates in the old and new text.
All functions are pure; texts are treated modulo one trailing newline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace


class MalformedDelta(ValueError):
    """Raised by parse_delta on text that is not a rendered delta."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class PatchConflict(ValueError):
    """Raised by apply_delta when a hunk's removed lines do not match."""

    def __init__(self, hunk_index: int, detail: str = ""):
        msg = f"hunk {hunk_index} does not apply"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.hunk_index = hunk_index


@dataclass
class Hunk:
    """One contiguous block of removed/added lines.

    `old_start`/`new_start` are 1-based first-line indices on each side.
    A side with count 0 uses the index of the line *after which* the
    change sits (0 means "before the first line").
    """

    old_start: int
    old_count: int
    new_start: int
    new_count: int
    removed: list[str] = field(default_factory=list)
    added: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if len(self.removed) != self.old_count or len(self.added) != self.new_count:
            raise ValueError("hunk counts disagree with line lists")
        if self.old_count + self.new_count < 1:
            raise ValueError("empty hunk")
        for line in (*self.removed, *self.added):
            if "\n" in line or "\r" in line:
                raise ValueError("hunk lines must not contain line terminators")

    @property
    def old_end(self) -> int:
        """Last old line covered (inclusive); old_start-1 for insertions."""
        return self.old_start + self.old_count - 1


@dataclass
class Delta:
    """An ordered, non-overlapping sequence of hunks. Empty means equal texts."""

    hunks: list[Hunk] = field(default_factory=list)

    def validate(self) -> None:
        prev_end = 0
        for h in self.hunks:
            h.validate()
            # strictly increasing, non-overlapping in old coordinates; a
            # count-0 hunk occupies the gap after old_start
            low = h.old_start if h.old_count > 0 else h.old_start + 1
            if low <= prev_end:
                raise ValueError("hunks overlap or are unsorted in old coordinates")
            prev_end = h.old_end if h.old_count > 0 else h.old_start

    def __bool__(self) -> bool:
        return bool(self.hunks)


@dataclass(frozen=True)
class DeltaStyle:
    """Rendering/parsing options for delta text."""

    hunk_delimiter: str = "@@"
    emit_file_headers: bool = False
    from_label: str = "a"
    to_label: str = "b"

    def __post_init__(self) -> None:
        if not self.hunk_delimiter or "\n" in self.hunk_delimiter:
            raise ValueError("hunk_delimiter must be non-empty and single-line")


DEFAULT_STYLE = DeltaStyle()


def split_lines(text: str) -> list[str]:
    """Split into lines, normalizing away a single trailing newline."""
    if text == "":
        return []
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n")


def _myers_edits(a: list[int], b: list[int]) -> list[tuple[str, int, int]]:
    """Shortest edit script between two id sequences.

    Returns ('del', i, _) / ('ins', _, j) / ('eq', i, j) entries in forward
    order. Ties in the edit graph are broken toward the earliest deletion,
    which makes the output deterministic.
    """
    n, m = len(a), len(b)
    max_d = n + m
    if max_d == 0:
        return []
    offset = max_d
    v = [0] * (2 * max_d + 2)
    trace: list[list[int]] = []
    found = False
    for d in range(max_d + 1):
        trace.append(v.copy())
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v[offset + k - 1] < v[offset + k + 1]):
                x = v[offset + k + 1]
            else:
                x = v[offset + k - 1] + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[offset + k] = x
            if x >= n and y >= m:
                found = True
                break
        if found:
            break

    edits: list[tuple[str, int, int]] = []
    x, y = n, m
    for d in range(len(trace) - 1, 0, -1):
        vd = trace[d]
        k = x - y
        if k == -d or (k != d and vd[offset + k - 1] < vd[offset + k + 1]):
            prev_k = k + 1
        else:
            prev_k = k - 1
        prev_x = vd[offset + prev_k]
        prev_y = prev_x - prev_k
        while x > prev_x and y > prev_y:
            edits.append(("eq", x - 1, y - 1))
            x -= 1
            y -= 1
        if x == prev_x:
            edits.append(("ins", x, prev_y))
        else:
            edits.append(("del", prev_x, y))
        x, y = prev_x, prev_y
    while x > 0 and y > 0:
        edits.append(("eq", x - 1, y - 1))
        x -= 1
        y -= 1
    edits.reverse()
    return edits


def compute_delta(old_text: str, new_text: str) -> Delta:
    """Minimal line delta taking old_text to new_text.

    Line matching runs over interned line ids (exact equality), with common
    prefix/suffix stripped first. Equal inputs yield an empty Delta.
    """
    old_lines = split_lines(old_text)
    new_lines = split_lines(new_text)

    # strip common prefix/suffix before the O(ND) core
    pre = 0
    limit = min(len(old_lines), len(new_lines))
    while pre < limit and old_lines[pre] == new_lines[pre]:
        pre += 1
    suf = 0
    while (
        suf < limit - pre
        and old_lines[len(old_lines) - 1 - suf] == new_lines[len(new_lines) - 1 - suf]
    ):
        suf += 1
    mid_old = old_lines[pre : len(old_lines) - suf]
    mid_new = new_lines[pre : len(new_lines) - suf]

    ids: dict[str, int] = {}
    a = [ids.setdefault(line, len(ids)) for line in mid_old]
    b = [ids.setdefault(line, len(ids)) for line in mid_new]

    hunks: list[Hunk] = []
    removed: list[str] = []
    added: list[str] = []
    # positions of the last consumed line on each side, in full-text coords
    old_pos = pre
    new_pos = pre
    hunk_old_start = hunk_new_start = 0

    def flush() -> None:
        nonlocal removed, added
        if removed or added:
            hunks.append(
                Hunk(
                    old_start=hunk_old_start if removed else hunk_old_start - 1,
                    old_count=len(removed),
                    new_start=hunk_new_start if added else hunk_new_start - 1,
                    new_count=len(added),
                    removed=removed,
                    added=added,
                )
            )
            removed, added = [], []

    for op, i, j in _myers_edits(a, b):
        if op == "eq":
            flush()
            old_pos += 1
            new_pos += 1
        elif op == "del":
            if not removed and not added:
                hunk_old_start = old_pos + 1
                hunk_new_start = new_pos + 1
            removed.append(mid_old[i])
            old_pos += 1
        else:  # ins
            if not removed and not added:
                hunk_old_start = old_pos + 1
                hunk_new_start = new_pos + 1
            added.append(mid_new[j])
            new_pos += 1
    flush()
    return Delta(hunks)


def render_delta(delta: Delta, style: DeltaStyle = DEFAULT_STYLE) -> str:
    """Render a delta as hunk headers plus -/+ lines, no context lines.

    A side's ",count" is omitted when that side's count equals 1. The empty
    delta renders as the empty string.
    """
    delta.validate()
    if not delta.hunks:
        return ""
    d = style.hunk_delimiter
    out: list[str] = []
    if style.emit_file_headers:
        out.append(f"--- {style.from_label}")
        out.append(f"+++ {style.to_label}")
    for h in delta.hunks:
        old = str(h.old_start) if h.old_count == 1 else f"{h.old_start},{h.old_count}"
        new = str(h.new_start) if h.new_count == 1 else f"{h.new_start},{h.new_count}"
        out.append(f"{d} -{old} +{new} {d}")
        out.extend("-" + line for line in h.removed)
        out.extend("+" + line for line in h.added)
    return "\n".join(out)


def parse_delta(text: str, style: DeltaStyle = DEFAULT_STYLE) -> Delta:
    """Parse rendered delta text back into a Delta.

    Accepts an explicit ",1" count where the renderer would omit it, and
    tolerates interleaved -/+ lines within a hunk. Raises MalformedDelta
    with a 1-based line number otherwise.
    """
    d = re.escape(style.hunk_delimiter)
    header_re = re.compile(rf"^{d} -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? {d}$")
    lines = split_lines(text)
    hunks: list[Hunk] = []
    current: Hunk | None = None

    def close(last_line_no: int) -> None:
        if current is None:
            return
        if len(current.removed) != current.old_count:
            raise MalformedDelta(
                last_line_no,
                f"expected {current.old_count} removed line(s), got {len(current.removed)}",
            )
        if len(current.added) != current.new_count:
            raise MalformedDelta(
                last_line_no,
                f"expected {current.new_count} added line(s), got {len(current.added)}",
            )
        hunks.append(current)

    for idx, line in enumerate(lines):
        no = idx + 1
        if line.startswith(("--- ", "+++ ")) and current is None and not hunks:
            continue  # optional file headers
        m = header_re.match(line)
        if m:
            close(no)
            old_start, old_count = int(m.group(1)), int(m.group(2) or 1)
            new_start, new_count = int(m.group(3)), int(m.group(4) or 1)
            current = Hunk(old_start, old_count, new_start, new_count, [], [])
            continue
        if current is None:
            raise MalformedDelta(no, f"expected hunk header, got {line!r}")
        if line.startswith("-"):
            current.removed.append(line[1:])
        elif line.startswith("+"):
            current.added.append(line[1:])
        else:
            raise MalformedDelta(no, f"expected '-' or '+' prefix, got {line!r}")
        if len(current.removed) > current.old_count:
            raise MalformedDelta(no, "more removed lines than the header declares")
        if len(current.added) > current.new_count:
            raise MalformedDelta(no, "more added lines than the header declares")
    close(len(lines))
    delta = Delta(hunks)
    try:
        delta.validate()
    except ValueError as exc:
        raise MalformedDelta(len(lines), str(exc)) from exc
    return delta


def apply_delta(old_text: str, delta: Delta) -> str:
    """Apply a delta to old_text, producing the new text.

    Every hunk's removed lines must match old_text at its coordinates;
    otherwise PatchConflict(hunk_index) is raised.
    """
    delta.validate()
    old_lines = split_lines(old_text)
    out: list[str] = []
    cursor = 0  # lines of old consumed so far
    for idx, h in enumerate(delta.hunks):
        anchor = h.old_start - 1 if h.old_count > 0 else h.old_start
        if anchor < cursor or anchor > len(old_lines):
            raise PatchConflict(idx, "hunk start outside remaining text")
        out.extend(old_lines[cursor:anchor])
        cursor = anchor
        if h.old_count > 0:
            actual = old_lines[cursor : cursor + h.old_count]
            if actual != h.removed:
                raise PatchConflict(idx, "removed lines do not match old text")
            cursor += h.old_count
        out.extend(h.added)
    out.extend(old_lines[cursor:])
    return "\n".join(out)


def invert_delta(delta: Delta) -> Delta:
    """Delta that undoes this one: swaps removed/added and both coordinates."""
    delta.validate()
    return Delta(
        [
            replace(
                h,
                old_start=h.new_start,
                old_count=h.new_count,
                new_start=h.old_start,
                new_count=h.old_count,
                removed=list(h.added),
                added=list(h.removed),
            )
            for h in delta.hunks
        ]
    )
