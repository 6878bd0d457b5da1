"""Chunking trajectories into a padded, masked training dataset.

Generates expert demonstrations in the toy gridworld, slices them into
horizon-4 windows, and emits delta-form samples plus a statistics
manifest. Equivalent CLI:

    histdelta gen-data demo.trajs --count 8
    histdelta chunk demo.trajs demo.samples --horizon 4 --format diff --context 512

Run:  python demos/04_chunk_dataset.py
"""

import tempfile
from pathlib import Path

from histdelta import ChunkConfig, emit_dataset, ingest, iter_samples
from histdelta.envsim import run_expert_episode
from histdelta.formatting import MarkerConfig
from histdelta.tokenizer import WhitespaceTokenizer, register_special_tokens
import json

workdir = Path(tempfile.mkdtemp(prefix="histdelta-demo-"))
trajs = workdir / "demo.trajs"

with open(trajs, "w", encoding="utf-8") as fh:
    for seed in range(8):
        t = run_expert_episode(seed).trajectory
        fh.write(json.dumps({
            "id": t.id,
            "instruction": t.instruction,
            "observations": t.observations,
            "actions": t.actions,
        }) + "\n")

cfg = ChunkConfig(horizon=4, context_length=512)
tok = register_special_tokens(
    WhitespaceTokenizer(), list(MarkerConfig().markers)
)
samples = workdir / "demo.samples"
manifest = emit_dataset(ingest(trajs), cfg, tok, samples)

print(f"samples: {manifest.sample_count}, supervised tokens: {manifest.supervised_tokens}")
print(f"mean tokens per demo: {manifest.demo.mean:.1f} ± {manifest.demo.stddev:.1f}")
print(f"mean tokens per observation block: {manifest.observation.mean:.1f}")

# every sample is exactly context_length long; padding carries mask 0
for tokens, mask, meta in iter_samples(samples):
    assert len(tokens) == len(mask) == cfg.context_length
    assert all(bit == 0 for bit in mask[meta["tokens_unpadded"]:])
print("all samples padded and masked consistently")
print("files under:", workdir)
