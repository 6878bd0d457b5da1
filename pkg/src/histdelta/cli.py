"""Command-line interface.

Subcommands: diff, apply, convert, chunk, stats, assemble, gen-data,
rollout. Exit codes: 0 success, 1 usage error, 2 data error. Manifests
and stats print as structured text; diffs and prompts print as plain
text for shell composition.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from pathlib import Path

from . import envsim
from .assembler import BudgetExhausted, PromptRequest, build_prompt
from .chunker import ChunkConfig, IoError, ParseError, emit_dataset, ingest
from .diffcore import (
    DeltaStyle,
    MalformedDelta,
    PatchConflict,
    apply_delta,
    compute_delta,
    parse_delta,
    render_delta,
)
from .formatting import HistoryFormat, MarkerConfig, render_sample
from .history import Trajectory, Window, to_diff_history
from .masking import Objective
from .tokenizer import (
    BadMerges,
    BadVocab,
    EmptyStream,
    TokenizerSpec,
    WhitespaceTokenizer,
    load_bpe,
    register_special_tokens,
    token_stats,
)

USAGE_ERROR = 1
DATA_ERROR = 2

DATA_ERRORS = (
    ParseError,
    MalformedDelta,
    PatchConflict,
    BadVocab,
    BadMerges,
    BudgetExhausted,
    EmptyStream,
    IoError,
    OSError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _marker_config(args) -> MarkerConfig:
    return MarkerConfig(
        action_begin=args.action_marker,
        observation_begin=args.observation_marker,
        delta_style=DeltaStyle(hunk_delimiter=args.delimiter),
    )


def _tokenizer(args, cfg: MarkerConfig) -> TokenizerSpec:
    spec = args.tokenizer
    if spec == "whitespace":
        tok: TokenizerSpec = WhitespaceTokenizer()
    elif spec.startswith("bpe:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError("--tokenizer bpe takes the form bpe:VOCAB:MERGES")
        vocab = os.environ.get("HISTDELTA_BPE_VOCAB", parts[1])
        merges = os.environ.get("HISTDELTA_BPE_MERGES", parts[2])
        tok = load_bpe(vocab, merges)
    else:
        raise ValueError(f"unknown tokenizer {spec!r}")
    return register_special_tokens(tok, [cfg.action_begin, cfg.observation_begin])


def _add_marker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delimiter", default="@@", help="hunk delimiter (default @@)")
    p.add_argument("--action-marker", default="<|action|>")
    p.add_argument("--observation-marker", default="<|observation|>")


def _add_tokenizer_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--tokenizer",
        default="whitespace",
        help="'whitespace' or 'bpe:VOCAB:MERGES' (env HISTDELTA_BPE_VOCAB/"
        "HISTDELTA_BPE_MERGES override the paths)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="histdelta", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diff", help="print the line delta between two text files")
    p.add_argument("old_file")
    p.add_argument("new_file")
    p.add_argument("--delimiter", default="@@")
    p.add_argument("--file-headers", action="store_true")

    p = sub.add_parser("apply", help="apply a rendered delta to a text file")
    p.add_argument("old_file")
    p.add_argument("delta_file")
    p.add_argument("--delimiter", default="@@")

    p = sub.add_parser("convert", help="render trajectory records as history text")
    p.add_argument("input", help="trajectory JSONL file")
    p.add_argument("--format", choices=["full", "diff"], default="diff")
    p.add_argument(
        "--raw",
        action="store_true",
        help="print the bare rendered text (input must hold exactly one record)",
    )
    _add_marker_flags(p)

    p = sub.add_parser("chunk", help="emit a training dataset from trajectories")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--format", choices=["full", "diff"], default="diff")
    p.add_argument(
        "--objective", choices=["action-only", "action-world"], default="action-only"
    )
    p.add_argument("--context", type=int, default=4096)
    p.add_argument("--pad-id", type=int, default=0)
    p.add_argument(
        "--sampling", choices=["contiguous", "random"], default="contiguous"
    )
    p.add_argument("--count", type=int, help="windows per trajectory (random sampling)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="fail on malformed records")
    p.add_argument("--jobs", type=int, default=1)
    _add_marker_flags(p)
    _add_tokenizer_flag(p)

    p = sub.add_parser("stats", help="token statistics over a trajectory file")
    p.add_argument("input")
    p.add_argument("--format", choices=["full", "diff"], default="full")
    p.add_argument("--json", action="store_true")
    _add_marker_flags(p)
    _add_tokenizer_flag(p)

    p = sub.add_parser("assemble", help="build a budgeted prompt from a prefix record")
    p.add_argument("input", help="JSONL file with one trajectory-prefix record")
    p.add_argument("--h-max", type=int, required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--format", choices=["full", "diff"], default="diff")
    p.add_argument("--json", action="store_true", help="print a JSON object instead")
    p.add_argument("--allow-truncated", action="store_true")
    _add_marker_flags(p)
    _add_tokenizer_flag(p)

    p = sub.add_parser("gen-data", help="run the scripted expert over seeded episodes")
    p.add_argument("output")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--seed", type=int, default=0, help="first episode seed")
    p.add_argument("--t-max", type=int, default=200)

    p = sub.add_parser("rollout", help="evaluate a policy through the prompt pipeline")
    p.add_argument("--policy", default="expert", help="expert | external:CMD")
    p.add_argument("--episodes", type=int, default=16)
    p.add_argument("--seed", type=int, default=0, help="first episode seed")
    p.add_argument("--format", choices=["full", "diff"], default="diff")
    p.add_argument("--h-max", type=int, default=4)
    p.add_argument("--budget", type=int, default=1024)
    p.add_argument("--t-max", type=int, default=200)
    p.add_argument("--debug-anchor", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="parallel episodes (builtin policies)")
    p.add_argument("--out", help="write episode records to this JSONL file")
    _add_marker_flags(p)
    _add_tokenizer_flag(p)

    return parser


def _history_format(name: str) -> HistoryFormat:
    return HistoryFormat.DIFF_HISTORY if name == "diff" else HistoryFormat.FULL_TEXT


def _cmd_diff(args) -> int:
    style = DeltaStyle(hunk_delimiter=args.delimiter, emit_file_headers=args.file_headers)
    old = Path(args.old_file).read_text(encoding="utf-8")
    new = Path(args.new_file).read_text(encoding="utf-8")
    rendered = render_delta(compute_delta(old, new), style)
    if rendered:
        print(rendered)
    return 0


def _cmd_apply(args) -> int:
    style = DeltaStyle(hunk_delimiter=args.delimiter)
    old = Path(args.old_file).read_text(encoding="utf-8")
    delta = parse_delta(Path(args.delta_file).read_text(encoding="utf-8"), style)
    print(apply_delta(old, delta))
    return 0


def _cmd_convert(args) -> int:
    cfg = _marker_config(args)
    fmt = _history_format(args.format)
    rendered_texts: list[tuple[str, str]] = []
    for t in ingest(args.input, strict=True):
        window = Window(instruction=t.instruction, start=0, steps=list(zip(t.observations, t.actions)))
        view = to_diff_history(window) if fmt is HistoryFormat.DIFF_HISTORY else window
        rendered_texts.append((t.id, render_sample(view, cfg).text))
    if args.raw:
        if len(rendered_texts) != 1:
            raise ValueError("--raw requires exactly one trajectory record")
        sys.stdout.write(rendered_texts[0][1])
        return 0
    for tid, text in rendered_texts:
        print(json.dumps({"id": tid, "text": text}, ensure_ascii=False))
    return 0


def _cmd_chunk(args) -> int:
    cfg_markers = _marker_config(args)
    tok = _tokenizer(args, cfg_markers)
    cfg = ChunkConfig(
        horizon=args.horizon,
        format=_history_format(args.format),
        objective=(
            Objective.ACTION_ONLY
            if args.objective == "action-only"
            else Objective.ACTION_AND_WORLD_MODEL
        ),
        context_length=args.context,
        pad_token_id=args.pad_id,
        sampling="contiguous_partition" if args.sampling == "contiguous" else "uniform_random",
        sample_count=args.count,
        seed=args.seed if args.sampling == "random" else None,
        markers=cfg_markers,
    )
    manifest = emit_dataset(
        ingest(args.input, strict=args.strict), cfg, tok, args.output, jobs=args.jobs
    )
    print(manifest.to_json())
    return 0


def _cmd_stats(args) -> int:
    cfg = _marker_config(args)
    tok = _tokenizer(args, cfg)
    fmt = _history_format(args.format)
    obs_texts: list[str] = []
    act_texts: list[str] = []
    demo_texts: list[str] = []
    for t in ingest(args.input, strict=True):
        window = Window(instruction=t.instruction, start=0, steps=list(zip(t.observations, t.actions)))
        if fmt is HistoryFormat.DIFF_HISTORY:
            dw = to_diff_history(window)
            obs_texts.append(dw.anchor_observation)
            obs_texts.extend(render_delta(d, cfg.delta_style) for d, _ in dw.tail)
            demo_texts.append(render_sample(dw, cfg, terminate_final_action=True).text)
        else:
            obs_texts.extend(t.observations)
            demo_texts.append(render_sample(window, cfg, terminate_final_action=True).text)
        act_texts.extend(t.actions)

    report = {
        "Demo": token_stats(demo_texts, tok),
        "Obs": token_stats(obs_texts, tok),
        "Action": token_stats(act_texts, tok),
    }
    if args.json:
        out = {}
        for name, st in report.items():
            for key, value in st.as_dict().items():
                out[f"{key.capitalize()} Tokens Per {name}"] = value
        out["Total Tokens"] = report["Demo"].total
        print(json.dumps(out, ensure_ascii=False, indent=1))
        return 0
    for name, st in report.items():
        print(f"Min Tokens Per {name}: {st.min}")
        print(f"Max Tokens Per {name}: {st.max}")
        print(f"Median Tokens Per {name}: {st.median:g}")
        print(f"Mean Tokens Per {name}: {st.mean:.1f} ± {st.stddev:.1f}")
    print(f"Total Tokens: {report['Demo'].total}")
    return 0


def _cmd_assemble(args) -> int:
    cfg = _marker_config(args)
    tok = _tokenizer(args, cfg)
    with open(args.input, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if len(lines) != 1:
        raise ValueError("assemble expects exactly one trajectory-prefix record")
    obj = json.loads(lines[0])
    # a prefix record carries one more observation than actions
    t = Trajectory(
        id=str(obj.get("id", "prefix")),
        instruction=obj["instruction"],
        observations=list(obj["observations"]),
        actions=list(obj.get("actions", [])),
    )
    request = PromptRequest(
        trajectory_prefix=t,
        h_max=args.h_max,
        budget=args.budget,
        format=_history_format(args.format),
        cfg=cfg,
    )
    prompt = build_prompt(request, tok, allow_truncated_fallback=args.allow_truncated)
    if args.json:
        print(
            json.dumps(
                {
                    "chosen_h": prompt.chosen_h,
                    "token_count": len(prompt.tokens),
                    "degraded": prompt.degraded,
                    "tokens": prompt.tokens.ids,
                    "text": prompt.text,
                },
                ensure_ascii=False,
            )
        )
    else:
        print(f"chosen_h: {prompt.chosen_h}", file=sys.stderr)
        sys.stdout.write(prompt.text)
    return 0


def _cmd_gen_data(args) -> int:
    records = []
    with open(args.output, "w", encoding="utf-8") as fh:
        for seed in range(args.seed, args.seed + args.count):
            episode = envsim.run_expert_episode(seed, t_max=args.t_max)
            t = episode.trajectory
            fh.write(
                json.dumps(
                    {
                        "id": t.id,
                        "instruction": t.instruction,
                        "observations": t.observations,
                        "actions": t.actions,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            records.append(episode)
    rewards = [e.reward for e in records]
    print(
        json.dumps(
            {
                "episodes": len(records),
                "mean_reward": statistics.fmean(rewards),
                "successes": sum(e.termination is envsim.Termination.SUCCESS for e in records),
            }
        )
    )
    return 0


def _run_one_episode(work: tuple) -> "envsim.EpisodeRecord":
    seed, policy_spec, rollout_cfg, tok, cfg = work
    if policy_spec == "expert":
        policy = envsim.ExpertWrapper(cfg)
    elif policy_spec.startswith("external:"):
        policy = envsim.ExternalPolicy(policy_spec.split(":", 1)[1].split())
    else:
        raise ValueError(f"unknown policy {policy_spec!r}")
    try:
        return envsim.rollout(seed, policy, rollout_cfg, tok)
    finally:
        if hasattr(policy, "close"):
            policy.close()


def _cmd_rollout(args) -> int:
    cfg = _marker_config(args)
    tok = _tokenizer(args, cfg)
    rollout_cfg = envsim.RolloutConfig(
        format=_history_format(args.format),
        h_max=args.h_max,
        budget=args.budget,
        markers=cfg,
        t_max=args.t_max,
        debug_check_anchor=args.debug_anchor,
    )
    seeds = range(args.seed, args.seed + args.episodes)
    work = [(seed, args.policy, rollout_cfg, tok, cfg) for seed in seeds]
    # episodes are seed-independent; an external peer is owned by one
    # episode at a time, so external policies stay sequential
    if args.jobs > 1 and not args.policy.startswith("external:"):
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            episodes = list(pool.map(_run_one_episode, work))
    else:
        episodes = [_run_one_episode(w) for w in work]

    if args.out:
        with open(args.out, "w", encoding="utf-8") as out_fh:
            for episode in episodes:
                t = episode.trajectory
                out_fh.write(
                    json.dumps(
                        {
                            "id": t.id,
                            "instruction": t.instruction,
                            "observations": t.observations,
                            "actions": t.actions,
                            "reward": episode.reward,
                            "termination": episode.termination.value,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    rewards = [e.reward for e in episodes]
    print(
        json.dumps(
            {
                "episodes": len(episodes),
                "mean_reward": statistics.fmean(rewards) if rewards else 0.0,
                "successes": sum(
                    e.termination is envsim.Termination.SUCCESS for e in episodes
                ),
            }
        )
    )
    return 0


_COMMANDS = {
    "diff": _cmd_diff,
    "apply": _cmd_apply,
    "convert": _cmd_convert,
    "chunk": _cmd_chunk,
    "stats": _cmd_stats,
    "assemble": _cmd_assemble,
    "gen-data": _cmd_gen_data,
    "rollout": _cmd_rollout,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except DATA_ERRORS as exc:
        print(f"histdelta {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
