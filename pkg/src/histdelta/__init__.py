"""Line-delta interaction histories for text agents.

Compute and apply line-level deltas between consecutive observations,
serialize instruction/observation/action histories with special markers,
build per-token loss masks, chunk trajectories into training samples,
and assemble token-budgeted prompts with horizon backtracking.
"""

from .assembler import AssembledPrompt, BudgetExhausted, PromptRequest, build_prompt, fit_check
from .chunker import (
    ChunkConfig,
    DatasetManifest,
    DatasetSample,
    ParseError,
    emit_dataset,
    ingest,
    iter_samples,
    make_windows,
)
from .diffcore import (
    Delta,
    DeltaStyle,
    Hunk,
    MalformedDelta,
    PatchConflict,
    apply_delta,
    compute_delta,
    invert_delta,
    parse_delta,
    render_delta,
)
from .formatting import (
    HistoryFormat,
    MarkerCollision,
    MarkerConfig,
    RenderedSample,
    Role,
    SegmentMap,
    extract_action,
    render_sample,
    validate_action,
)
from .history import (
    DiffWindow,
    OutOfRange,
    Trajectory,
    Window,
    rebase,
    to_diff_history,
    to_full_history,
)
from .masking import AlignmentGap, LossMask, Objective, TokenizedSample, align_segments, build_mask
from .tokenizer import (
    ByteBpeTokenizer,
    StatsReport,
    TokenSequence,
    TokenizerSpec,
    WhitespaceTokenizer,
    load_bpe,
    register_special_tokens,
    token_stats,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentGap",
    "AssembledPrompt",
    "BudgetExhausted",
    "ByteBpeTokenizer",
    "ChunkConfig",
    "DatasetManifest",
    "DatasetSample",
    "Delta",
    "DeltaStyle",
    "DiffWindow",
    "HistoryFormat",
    "Hunk",
    "LossMask",
    "MalformedDelta",
    "MarkerCollision",
    "MarkerConfig",
    "Objective",
    "OutOfRange",
    "ParseError",
    "PatchConflict",
    "PromptRequest",
    "RenderedSample",
    "Role",
    "SegmentMap",
    "StatsReport",
    "TokenSequence",
    "TokenizedSample",
    "TokenizerSpec",
    "Trajectory",
    "WhitespaceTokenizer",
    "Window",
    "align_segments",
    "apply_delta",
    "build_mask",
    "build_prompt",
    "compute_delta",
    "emit_dataset",
    "extract_action",
    "fit_check",
    "ingest",
    "invert_delta",
    "iter_samples",
    "load_bpe",
    "make_windows",
    "parse_delta",
    "rebase",
    "register_special_tokens",
    "render_delta",
    "render_sample",
    "to_diff_history",
    "to_full_history",
    "token_stats",
    "validate_action",
]
