"""Tokenization layer: byte-level BPE and a whitespace test tokenizer.

Both implementations share one interface: encode/decode with exact
roundtrip, byte-offset tracking for mask alignment, and atomic special
tokens (markers are matched greedily before any sub-word logic runs).
Offsets are expressed in UTF-8 bytes so that coverage stays exact even
when a merge boundary falls inside a multi-byte character.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from math import sqrt
from pathlib import Path
from typing import Iterable, Protocol, runtime_checkable

import regex

# GPT-2 style pre-tokenization: contractions, letter runs, digit runs,
# symbol runs (with optional leading space), then whitespace.
_PRETOKEN_PATTERN = regex.compile(
    r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
)


class BadVocab(ValueError):
    pass


class BadMerges(ValueError):
    pass


class DuplicateSpecial(ValueError):
    pass


class EmptyStream(ValueError):
    pass


@dataclass
class TokenSequence:
    ids: list[int]

    @property
    def length(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)


TokenOffset = tuple[int, int, int]  # (token_id, byte_start, byte_end)


@runtime_checkable
class TokenizerSpec(Protocol):
    special_tokens: dict[str, int]

    def encode(self, text: str) -> TokenSequence: ...

    def encode_with_offsets(self, text: str) -> list[TokenOffset]: ...

    def decode(self, tokens: TokenSequence | Iterable[int]) -> str: ...

    @property
    def vocab_size(self) -> int: ...

    def with_special_tokens(self, markers: list[str]) -> "TokenizerSpec": ...


def register_special_tokens(t: TokenizerSpec, markers: list[str]) -> TokenizerSpec:
    """Return a tokenizer with each marker added as a single atomic token."""
    return t.with_special_tokens(markers)


def _special_splitter(specials: dict[str, int]) -> re.Pattern | None:
    if not specials:
        return None
    alts = sorted(specials, key=len, reverse=True)
    return re.compile("|".join(re.escape(s) for s in alts))


def _split_on_specials(text: str, pattern: re.Pattern | None) -> list[tuple[str, bool]]:
    """Split text into (span, is_special) pieces, specials matched greedily."""
    if pattern is None:
        return [(text, False)] if text else []
    pieces: list[tuple[str, bool]] = []
    pos = 0
    for m in pattern.finditer(text):
        if m.start() > pos:
            pieces.append((text[pos : m.start()], False))
        pieces.append((m.group(), True))
        pos = m.end()
    if pos < len(text):
        pieces.append((text[pos:], False))
    return pieces


def bytes_to_unicode() -> dict[int, str]:
    """The standard byte-to-printable-unicode table used by byte-level BPE."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


_BYTE_ENCODER = bytes_to_unicode()
_BYTE_DECODER = {c: b for b, c in _BYTE_ENCODER.items()}


def _get_pairs(word: tuple[str, ...]) -> set[tuple[str, str]]:
    return set(zip(word, word[1:]))


class ByteBpeTokenizer:
    """Byte-level BPE over a vocab map and ranked merge list."""

    def __init__(
        self,
        vocab: dict[str, int],
        merges: list[tuple[str, str]],
        special_tokens: dict[str, int] | None = None,
    ):
        self._vocab = vocab
        self._decoder = {i: t for t, i in vocab.items()}
        if len(self._decoder) != len(vocab):
            raise BadVocab("vocabulary ids are not unique")
        self._merge_ranks = {pair: rank for rank, pair in enumerate(merges)}
        self._merges = merges
        self.special_tokens = dict(special_tokens or {})
        self._special_decoder = {i: t for t, i in self.special_tokens.items()}
        self._special_pattern = _special_splitter(self.special_tokens)
        self._cache: dict[str, tuple[str, ...]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self._vocab) + len(self.special_tokens)

    def with_special_tokens(self, markers: list[str]) -> "ByteBpeTokenizer":
        specials = dict(self.special_tokens)
        next_id = len(self._vocab) + len(specials)
        for marker in markers:
            if marker in specials or marker in self._vocab:
                raise DuplicateSpecial(marker)
            specials[marker] = next_id
            next_id += 1
        return ByteBpeTokenizer(self._vocab, self._merges, specials)

    def _bpe(self, pretoken: str) -> tuple[str, ...]:
        cached = self._cache.get(pretoken)
        if cached is not None:
            return cached
        word = tuple(_BYTE_ENCODER[b] for b in pretoken.encode("utf-8"))
        while len(word) > 1:
            pairs = _get_pairs(word)
            best = min(pairs, key=lambda p: self._merge_ranks.get(p, 1 << 60))
            if best not in self._merge_ranks:
                break
            first, second = best
            merged: list[str] = []
            i = 0
            while i < len(word):
                if i < len(word) - 1 and word[i] == first and word[i + 1] == second:
                    merged.append(first + second)
                    i += 2
                else:
                    merged.append(word[i])
                    i += 1
            word = tuple(merged)
        self._cache[pretoken] = word
        return word

    def encode_with_offsets(self, text: str) -> list[TokenOffset]:
        out: list[TokenOffset] = []
        byte_pos = 0
        for span, is_special in _split_on_specials(text, self._special_pattern):
            span_bytes = len(span.encode("utf-8"))
            if is_special:
                out.append((self.special_tokens[span], byte_pos, byte_pos + span_bytes))
                byte_pos += span_bytes
                continue
            for m in _PRETOKEN_PATTERN.finditer(span):
                for piece in self._bpe(m.group()):
                    try:
                        token_id = self._vocab[piece]
                    except KeyError:
                        raise BadVocab(f"token {piece!r} missing from vocabulary") from None
                    out.append((token_id, byte_pos, byte_pos + len(piece)))
                    byte_pos += len(piece)
        return out

    def encode(self, text: str) -> TokenSequence:
        return TokenSequence([tid for tid, _, _ in self.encode_with_offsets(text)])

    def decode(self, tokens: TokenSequence | Iterable[int]) -> str:
        parts: list[str] = []
        buffer: list[int] = []

        def flush() -> None:
            if buffer:
                parts.append(bytes(buffer).decode("utf-8", errors="replace"))
                buffer.clear()

        for tid in tokens:
            special = self._special_decoder.get(tid)
            if special is not None:
                flush()
                parts.append(special)
                continue
            token = self._decoder.get(tid)
            if token is None:
                raise KeyError(f"unknown token id {tid}")
            buffer.extend(_BYTE_DECODER[c] for c in token)
        flush()
        return "".join(parts)


def load_bpe(vocab_file: str | Path, merges_file: str | Path) -> ByteBpeTokenizer:
    """Load a byte-level BPE tokenizer from vocab JSON and a merges list."""
    vocab_path, merges_path = Path(vocab_file), Path(merges_file)
    try:
        with open(vocab_path, encoding="utf-8") as fh:
            vocab = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadVocab(f"{vocab_path}: {exc}") from exc
    if not isinstance(vocab, dict):
        raise BadVocab(f"{vocab_path}: expected an object mapping token to id")
    for token, tid in vocab.items():
        if not isinstance(tid, int):
            raise BadVocab(f"{vocab_path}: id for {token!r} is not an integer")

    merges: list[tuple[str, str]] = []
    try:
        lines = merges_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise BadMerges(f"{merges_path}: {exc}") from exc
    for line_no, line in enumerate(lines, start=1):
        if line_no == 1 and line.startswith("#"):
            continue
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise BadMerges(f"{merges_path}:{line_no}: expected two space-separated tokens")
        if parts[0] + parts[1] not in vocab:
            raise BadMerges(f"{merges_path}:{line_no}: merge result not in vocabulary")
        merges.append((parts[0], parts[1]))
    return ByteBpeTokenizer(vocab, merges)


class WhitespaceTokenizer:
    """Splits text into alternating non-space/whitespace runs.

    Intended for fast, hand-checkable pipeline tests: every run (including
    whitespace) is a token, so decode(encode(s)) == s holds exactly. The
    vocabulary grows as new runs are seen; growth is lock-protected.
    """

    _RUN = re.compile(r"\S+|\s+")

    def __init__(self, special_tokens: dict[str, int] | None = None):
        self.special_tokens = dict(special_tokens or {})
        self._special_decoder = {i: t for t, i in self.special_tokens.items()}
        self._special_pattern = _special_splitter(self.special_tokens)
        self._ids: dict[str, int] = {}
        self._tokens: list[str] = []
        self._lock = threading.Lock()
        # reserve dense ids below the specials so both spaces stay disjoint
        self._dynamic_base = (max(self.special_tokens.values()) + 1) if self.special_tokens else 0

    @property
    def vocab_size(self) -> int:
        return self._dynamic_base + len(self._tokens)

    def with_special_tokens(self, markers: list[str]) -> "WhitespaceTokenizer":
        specials = dict(self.special_tokens)
        next_id = (max(specials.values()) + 1) if specials else 0
        for marker in markers:
            if marker in specials:
                raise DuplicateSpecial(marker)
            specials[marker] = next_id
            next_id += 1
        return WhitespaceTokenizer(specials)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def _id_for(self, run: str) -> int:
        tid = self._ids.get(run)
        if tid is not None:
            return tid
        with self._lock:
            tid = self._ids.get(run)
            if tid is None:
                tid = self._dynamic_base + len(self._tokens)
                self._ids[run] = tid
                self._tokens.append(run)
        return tid

    def encode_with_offsets(self, text: str) -> list[TokenOffset]:
        out: list[TokenOffset] = []
        byte_pos = 0
        for span, is_special in _split_on_specials(text, self._special_pattern):
            if is_special:
                end = byte_pos + len(span.encode("utf-8"))
                out.append((self.special_tokens[span], byte_pos, end))
                byte_pos = end
                continue
            for m in self._RUN.finditer(span):
                end = byte_pos + len(m.group().encode("utf-8"))
                out.append((self._id_for(m.group()), byte_pos, end))
                byte_pos = end
        return out

    def encode(self, text: str) -> TokenSequence:
        return TokenSequence([tid for tid, _, _ in self.encode_with_offsets(text)])

    def decode(self, tokens: TokenSequence | Iterable[int]) -> str:
        parts = []
        for tid in tokens:
            special = self._special_decoder.get(tid)
            if special is not None:
                parts.append(special)
                continue
            idx = tid - self._dynamic_base
            if idx < 0 or idx >= len(self._tokens):
                raise KeyError(f"unknown token id {tid}")
            parts.append(self._tokens[idx])
        return "".join(parts)


@dataclass(frozen=True)
class StatsReport:
    count: int
    min: int
    max: int
    median: float
    mean: float
    stddev: float
    total: int

    def as_dict(self) -> dict[str, float | int]:
        return {
            "count": self.count,
            "min": self.min,
            "max": self.max,
            "median": self.median,
            "mean": self.mean,
            "stddev": self.stddev,
            "total": self.total,
        }


def stats_from_counts(counts: list[int]) -> StatsReport:
    if not counts:
        raise EmptyStream("no values to summarize")
    ordered = sorted(counts)
    n = len(ordered)
    mid = n // 2
    median = float(ordered[mid]) if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2.0
    total = sum(ordered)
    mean = total / n
    variance = sum((c - mean) ** 2 for c in ordered) / n
    return StatsReport(
        count=n,
        min=ordered[0],
        max=ordered[-1],
        median=median,
        mean=mean,
        stddev=sqrt(variance),
        total=total,
    )


def token_stats(texts: Iterable[str], t: TokenizerSpec) -> StatsReport:
    """Summarize token counts over a finite stream of texts.

    Median is exact (full collection); mean/stddev are computed over the
    collected counts with population normalization.
    """
    counts = [len(t.encode(text)) for text in texts]
    return stats_from_counts(counts)
