"""Dataset pipeline: trajectory files in, training samples + manifest out.

Trajectories stream from a JSON-lines file, are sliced into horizon
windows, rendered (full-text or delta form), tokenized, masked, and
padded or truncated to a fixed context length. The manifest reports the
dataset statistics (per demo / per observation / per action token
counts) computed from the raw, pre-truncation content.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .diffcore import render_delta
from .formatting import HistoryFormat, MarkerConfig, render_sample
from .history import DiffWindow, Trajectory, Window, rebase, to_diff_history
from .masking import Objective, align_segments, build_mask
from .tokenizer import StatsReport, TokenizerSpec, stats_from_counts

logger = logging.getLogger(__name__)

CONTIGUOUS_PARTITION = "contiguous_partition"
UNIFORM_RANDOM = "uniform_random"


class ParseError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class IoError(OSError):
    pass


@dataclass(frozen=True)
class ChunkConfig:
    horizon: int
    format: HistoryFormat = HistoryFormat.DIFF_HISTORY
    objective: Objective = Objective.ACTION_ONLY
    context_length: int = 4096
    pad_token_id: int = 0
    sampling: str = CONTIGUOUS_PARTITION
    sample_count: int | None = None  # uniform_random only
    seed: int | None = None  # uniform_random only
    markers: MarkerConfig = field(default_factory=MarkerConfig)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.context_length < 1:
            raise ValueError("context length must be >= 1")
        if self.sampling not in (CONTIGUOUS_PARTITION, UNIFORM_RANDOM):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == UNIFORM_RANDOM:
            if not self.sample_count or self.sample_count < 1:
                raise ValueError("uniform_random sampling needs sample_count >= 1")
            if self.seed is None:
                raise ValueError("uniform_random sampling needs a fixed seed")


def parse_trajectory_record(obj: dict, line_no: int = 0) -> Trajectory:
    try:
        t = Trajectory(
            id=str(obj["id"]),
            instruction=obj["instruction"],
            observations=list(obj["observations"]),
            actions=list(obj["actions"]),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(line_no, f"bad trajectory record: {exc}") from exc
    try:
        t.validate()
    except ValueError as exc:
        raise ParseError(line_no, str(exc)) from exc
    return t


def ingest(path: str | Path, strict: bool = True) -> Iterator[Trajectory]:
    """Stream trajectories from a JSON-lines file.

    Malformed records raise ParseError when strict, otherwise they are
    logged with their line number and skipped. An empty file yields an
    empty stream.
    """
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(line_no, f"invalid JSON: {exc}") from exc
                yield parse_trajectory_record(obj, line_no)
            except ParseError:
                if strict:
                    raise
                logger.warning("skipping malformed record at %s:%d", path, line_no)


def make_windows(t: Trajectory, cfg: ChunkConfig) -> Iterator[Window]:
    """Slice one trajectory into horizon-H windows.

    Contiguous partitioning covers the trajectory with ceil(T/H) windows,
    the last possibly shorter. Uniform random sampling draws window starts
    with replacement from [0, max(0, T-H)] using a generator seeded from
    (cfg.seed, trajectory id), so runs are reproducible.
    """
    t.validate()
    T, H = t.length, cfg.horizon
    if cfg.sampling == CONTIGUOUS_PARTITION:
        starts: Iterable[int] = range(0, T, H)
    else:
        rng = random.Random(f"{cfg.seed}:{t.id}")
        hi = max(0, T - H)
        starts = (rng.randint(0, hi) for _ in range(cfg.sample_count or 0))
    for start in starts:
        yield rebase(t, start, min(H, T - start))


@dataclass
class DatasetSample:
    tokens: list[int]
    mask: list[int]
    meta: dict

    def to_json(self) -> str:
        return json.dumps(
            {"tokens": self.tokens, "mask": self.mask, "meta": self.meta},
            ensure_ascii=False,
        )


@dataclass
class DatasetManifest:
    sample_count: int
    truncated_count: int
    supervised_tokens: int
    horizon: int
    format: str
    objective: str
    context_length: int
    pad_token_id: int
    demo: StatsReport
    observation: StatsReport
    action: StatsReport

    def to_dict(self) -> dict:
        def rows(name: str, st: StatsReport) -> dict:
            return {
                f"Min Tokens Per {name}": st.min,
                f"Max Tokens Per {name}": st.max,
                f"Median Tokens Per {name}": st.median,
                f"Mean Tokens Per {name}": st.mean,
                f"Stddev Tokens Per {name}": st.stddev,
            }

        out = {
            "sample_count": self.sample_count,
            "truncated_count": self.truncated_count,
            "supervised_tokens": self.supervised_tokens,
            "format": self.format,
            "objective": self.objective,
            "context_length": self.context_length,
            "pad_token_id": self.pad_token_id,
            "History Horizon Per Demo": self.horizon,
        }
        out.update(rows("Demo", self.demo))
        out.update(rows("Obs", self.observation))
        out.update(rows("Action", self.action))
        out["Total Tokens"] = self.demo.total
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1)


def build_sample(
    window: Window, cfg: ChunkConfig, tok: TokenizerSpec, trajectory_id: str = ""
) -> tuple[DatasetSample, list[int], list[int]]:
    """Render/tokenize/mask/pad one window.

    Returns the sample plus the per-observation and per-action token
    counts that feed the manifest statistics. Observation counts reflect
    the representation in use: full text or rendered delta blocks.
    """
    if cfg.format is HistoryFormat.DIFF_HISTORY:
        view: Window | DiffWindow = to_diff_history(window)
        obs_texts = [view.anchor_observation] + [
            render_delta(delta, cfg.markers.delta_style) for delta, _ in view.tail
        ]
    else:
        view = window
        obs_texts = [obs for obs, _ in window.steps]
    actions = [a for _, a in window.steps]

    rendered = render_sample(view, cfg.markers, terminate_final_action=True)
    ts = align_segments(rendered, tok)
    mask = build_mask(ts, cfg.objective)

    ids = list(ts.tokens.ids)
    bits = list(mask.bits)
    raw_len = len(ids)
    C = cfg.context_length
    truncated = raw_len > C
    if truncated:
        ids, bits = ids[:C], bits[:C]
    elif raw_len < C:
        ids += [cfg.pad_token_id] * (C - raw_len)
        bits += [0] * (C - raw_len)

    sample = DatasetSample(
        tokens=ids,
        mask=bits,
        meta={
            "trajectory_id": trajectory_id,
            "window_start": window.start,
            "h": window.horizon,
            "format": cfg.format.value,
            "truncated": truncated,
            "tokens_unpadded": raw_len,
        },
    )
    obs_counts = [len(tok.encode(text)) for text in obs_texts]
    act_counts = [len(tok.encode(a)) for a in actions]
    return sample, obs_counts, act_counts


def _process_one(
    args: tuple[Trajectory, ChunkConfig, TokenizerSpec]
) -> tuple[list[str], list[int], list[int], list[int], int, int]:
    t, cfg, tok = args
    lines: list[str] = []
    demo_counts: list[int] = []
    obs_counts: list[int] = []
    act_counts: list[int] = []
    supervised = 0
    truncated = 0
    for window in make_windows(t, cfg):
        sample, oc, ac = build_sample(window, cfg, tok, trajectory_id=t.id)
        lines.append(sample.to_json())
        demo_counts.append(sample.meta["tokens_unpadded"])
        obs_counts.extend(oc)
        act_counts.extend(ac)
        supervised += sum(sample.mask)
        truncated += int(sample.meta["truncated"])
    return lines, demo_counts, obs_counts, act_counts, supervised, truncated


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_suffix(out.suffix + ".manifest.json")


def emit_dataset(
    trajectories: Iterable[Trajectory],
    cfg: ChunkConfig,
    tok: TokenizerSpec,
    out: str | Path,
    jobs: int = 1,
) -> DatasetManifest:
    """Write samples to a JSON-lines file and return the manifest.

    The manifest is also written next to the samples (see manifest_path).
    Output order is deterministic: input trajectory order, then window
    start. With jobs > 1, trajectories are processed in parallel and
    collected back in input order, so output bytes do not depend on the
    worker count (requires a fixed-vocabulary tokenizer).
    """
    work = ((t, cfg, tok) for t in trajectories)
    if jobs > 1:
        executor = ProcessPoolExecutor(max_workers=jobs)
        results: Iterable = executor.map(_process_one, work, chunksize=4)
    else:
        executor = None
        results = map(_process_one, work)

    demo_counts: list[int] = []
    obs_counts: list[int] = []
    act_counts: list[int] = []
    supervised = 0
    truncated = 0
    sample_count = 0
    try:
        with open(out, "w", encoding="utf-8") as fh:
            for lines, dc, oc, ac, sup, trunc in results:
                for line in lines:
                    fh.write(line + "\n")
                sample_count += len(lines)
                demo_counts.extend(dc)
                obs_counts.extend(oc)
                act_counts.extend(ac)
                supervised += sup
                truncated += trunc
    except OSError as exc:
        raise IoError(str(exc)) from exc
    finally:
        if executor is not None:
            executor.shutdown()

    if sample_count == 0:
        raise ParseError(0, "no samples produced (empty input stream)")
    manifest = DatasetManifest(
        sample_count=sample_count,
        truncated_count=truncated,
        supervised_tokens=supervised,
        horizon=cfg.horizon,
        format=cfg.format.value,
        objective=cfg.objective.value,
        context_length=cfg.context_length,
        pad_token_id=cfg.pad_token_id,
        demo=stats_from_counts(demo_counts),
        observation=stats_from_counts(obs_counts),
        action=stats_from_counts(act_counts),
    )
    try:
        manifest_path(out).write_text(manifest.to_json() + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return manifest


def iter_samples(path: str | Path) -> Iterator[tuple[list[int], list[int], dict]]:
    """Stream (tokens, mask, meta) records from an emitted sample file."""
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    yield obj["tokens"], obj["mask"], obj["meta"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise IoError(f"{path}:{line_no}: broken sample record: {exc}") from exc
    except OSError as exc:
        raise IoError(str(exc)) from exc
