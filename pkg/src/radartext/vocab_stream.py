"""Unified text + radar vocabulary, mixed sequences and span corruption.

Id layout::

    [0, text_size)                         text (WordPiece or byte fallback)
    [text_size, text_size + K)             radar tokens
    text_size + K                          /som
    text_size + K + 1                      /eom
    text_size + K + 2 ...                  span sentinels
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import VocabError
from .tokenizer_front import TokenSequence

TEXT, RADAR, SENTINEL = "T", "R", "S"


@dataclass(frozen=True)
class Vocabulary:
    text_size: int = 32768
    radar_size: int = 512
    span_sentinel_count: int = 100

    def __post_init__(self):
        if self.text_size < 1 or self.radar_size < 1 or self.span_sentinel_count < 0:
            raise VocabError("text and radar sizes must be >= 1, sentinel count >= 0")

    @property
    def radar_offset(self) -> int:
        return self.text_size

    @property
    def som_id(self) -> int:
        return self.text_size + self.radar_size

    @property
    def eom_id(self) -> int:
        return self.som_id + 1

    @property
    def first_span_sentinel(self) -> int:
        return self.eom_id + 1

    @property
    def total(self) -> int:
        return self.text_size + self.radar_size + 2 + self.span_sentinel_count

    def span_sentinel(self, i: int) -> int:
        if not 0 <= i < self.span_sentinel_count:
            raise VocabError(
                f"span sentinel {i} exceeds budget of {self.span_sentinel_count}; "
                "build the vocabulary with a larger span_sentinels budget")
        return self.first_span_sentinel + i

    def classify(self, token_id: int) -> str:
        """'text', 'radar', 'som', 'eom' or 'span_sentinel'."""
        i = int(token_id)
        if 0 <= i < self.text_size:
            return "text"
        if i < self.som_id and i >= self.radar_offset:
            return "radar"
        if i == self.som_id:
            return "som"
        if i == self.eom_id:
            return "eom"
        if self.first_span_sentinel <= i < self.total:
            return "span_sentinel"
        raise VocabError(f"id {i} outside vocabulary of size {self.total}")

    def is_span_sentinel(self, token_id: int) -> bool:
        return self.first_span_sentinel <= token_id < self.total


def build_vocab(text_size: int = 32768, radar_k: int = 512, span_sentinels: int = 100) -> Vocabulary:
    return Vocabulary(text_size, radar_k, span_sentinels)


@dataclass(frozen=True)
class MixedSequence:
    ids: tuple[int, ...]
    segments: tuple[str, ...]  # per id: T (text), R (radar) or S (sentinel)

    def __len__(self):
        return len(self.ids)


def _radar_ids(tokens, vocab: Vocabulary) -> list[int]:
    out = []
    for pos, t in enumerate(tokens):
        t = int(t)
        if not 0 <= t < vocab.radar_size:
            raise VocabError(f"radar token {t} at position {pos} outside [0, {vocab.radar_size})")
        out.append(vocab.radar_offset + t)
    return out


def wrap_radar(tokens, vocab: Vocabulary) -> MixedSequence:
    ids = [vocab.som_id] + _radar_ids(tokens, vocab) + [vocab.eom_id]
    return MixedSequence(tuple(ids), (SENTINEL,) + (RADAR,) * (len(ids) - 2) + (SENTINEL,))


def unwrap_radar(seq: MixedSequence, vocab: Vocabulary) -> TokenSequence:
    ids = list(seq.ids)
    if len(ids) < 2 or ids[0] != vocab.som_id or ids[-1] != vocab.eom_id:
        raise VocabError("radar segment must be delimited by /som ... /eom")
    inner = ids[1:-1]
    for pos, i in enumerate(inner, start=1):
        if vocab.classify(i) != "radar":
            raise VocabError(f"non-radar id {i} at position {pos} inside radar segment")
    return TokenSequence(tuple(i - vocab.radar_offset for i in inner), vocab.radar_size)


def interleave(text_ids, radar_tokens, vocab: Vocabulary, order: str = "text_first") -> MixedSequence:
    """Concatenate text ids with the ``/som``-wrapped radar tokens."""
    text = []
    for pos, i in enumerate(text_ids):
        i = int(i)
        if not 0 <= i < vocab.text_size:
            raise VocabError(f"text id {i} at position {pos} outside [0, {vocab.text_size})")
        text.append(i)
    radar = wrap_radar(radar_tokens, vocab)
    t_seg = (TEXT,) * len(text)
    if order == "text_first":
        return MixedSequence(tuple(text) + radar.ids, t_seg + radar.segments)
    if order == "radar_first":
        return MixedSequence(radar.ids + tuple(text), radar.segments + t_seg)
    raise VocabError(f"unknown order {order!r}")


def byte_tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Fallback text tokenizer: one id per UTF-8 byte."""
    if vocab.text_size < 256:
        raise VocabError("byte fallback needs text_size >= 256")
    return list(text.encode("utf-8"))


def read_text_ids(path, vocab: Vocabulary) -> list[int]:
    """Read externally tokenized ids, one integer per line."""
    ids = [int(x) for x in Path(path).read_text(encoding="utf-8").split()]
    for pos, i in enumerate(ids):
        if not 0 <= i < vocab.text_size:
            raise VocabError(f"text id {i} at position {pos} outside [0, {vocab.text_size})")
    return ids


def write_mixed(seq: MixedSequence, path) -> None:
    """Ids one per line at ``path``; segment tags alongside in ``<path>.seg``."""
    path = Path(path)
    path.write_text("".join(f"{i}\n" for i in seq.ids), encoding="utf-8")
    Path(str(path) + ".seg").write_text("".join(f"{s}\n" for s in seq.segments), encoding="utf-8")


def read_mixed(path) -> MixedSequence:
    path = Path(path)
    ids = tuple(int(x) for x in path.read_text(encoding="utf-8").split())
    segs = tuple(Path(str(path) + ".seg").read_text(encoding="utf-8").split())
    if len(ids) != len(segs):
        raise VocabError(f"{path}: {len(ids)} ids but {len(segs)} segment tags")
    return MixedSequence(ids, segs)


# ---------------------------------------------------------------------------
# span corruption

def _span_layout(length: int, ratio: float, mean_span: float, rng: np.random.Generator):
    """Start/length pairs of noise spans covering ``round(length * ratio)`` tokens."""
    n_noise = int(round(length * ratio))
    if n_noise == 0:
        return []
    n_noise = min(n_noise, length)
    # geometric span lengths (support >= 1, mean mean_span), last one trimmed
    lengths = []
    total = 0
    while total < n_noise:
        ln = int(rng.geometric(1.0 / mean_span)) if mean_span > 1 else 1
        ln = min(ln, n_noise - total)
        lengths.append(ln)
        total += ln
    # spans must be separated by at least one kept token so they stay distinct
    n_keep = length - n_noise
    while len(lengths) > 1 and len(lengths) - 1 > n_keep:
        tail = lengths.pop()
        lengths[-1] += tail
    rng.shuffle(lengths)
    n_spans = len(lengths)
    # random gaps: n_spans + 1 gaps, interior ones >= 1, summing to n_keep
    free = n_keep - (n_spans - 1)
    cuts = np.sort(rng.integers(0, free + 1, size=n_spans))
    gaps = np.diff(np.concatenate([[0], cuts, [free]]))
    gaps[1:-1] += 1
    spans, pos = [], 0
    for g, ln in zip(gaps[:-1], lengths):
        pos += int(g)
        spans.append((pos, ln))
        pos += ln
    return spans


def span_corrupt(tokens, vocab: Vocabulary, ratio: float = 0.15, mean_span: float = 3.0,
                 seed: int = 0):
    """Replace random radar-token spans with unique span sentinels.

    Returns ``(corrupted, targets)`` as global id tuples. ``targets`` lists each
    sentinel followed by the tokens it hides, then one closing sentinel; it is
    empty when rounding leaves nothing to mask.
    """
    if not 0 < ratio < 1:
        raise VocabError("ratio must be in (0, 1)")
    if not mean_span >= 1:
        raise VocabError("mean_span must be >= 1")
    ids = _radar_ids(tokens, vocab)
    if not ids:
        raise VocabError("cannot corrupt an empty sequence")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))
    spans = _span_layout(len(ids), ratio, mean_span, rng)
    if not spans:
        return tuple(ids), ()
    if len(spans) + 1 > vocab.span_sentinel_count:
        raise VocabError(
            f"{len(spans)} spans need {len(spans) + 1} sentinels but the budget is "
            f"{vocab.span_sentinel_count}; build the vocabulary with a larger span_sentinels budget")
    corrupted, targets, pos = [], [], 0
    for k, (start, ln) in enumerate(spans):
        sent = vocab.span_sentinel(k)
        corrupted.extend(ids[pos:start])
        corrupted.append(sent)
        targets.append(sent)
        targets.extend(ids[start:start + ln])
        pos = start + ln
    corrupted.extend(ids[pos:])
    targets.append(vocab.span_sentinel(len(spans)))
    return tuple(corrupted), tuple(targets)


def splice_back(corrupted, targets, vocab: Vocabulary) -> TokenSequence:
    """Invert :func:`span_corrupt`, returning the original radar tokens."""
    fill: dict[int, list[int]] = {}
    current = None
    for i in targets:
        if vocab.is_span_sentinel(i):
            current = i
            fill.setdefault(i, [])
        elif current is None:
            raise VocabError("targets must start with a span sentinel")
        else:
            fill[current].append(i)
    out = []
    for i in corrupted:
        if vocab.is_span_sentinel(i):
            if i not in fill:
                raise VocabError(f"sentinel {i} has no target span")
            out.extend(fill[i])
        else:
            out.append(i)
    for pos, i in enumerate(out):
        if vocab.classify(i) != "radar":
            raise VocabError(f"non-radar id {i} at position {pos}")
    return TokenSequence(tuple(i - vocab.radar_offset for i in out), vocab.radar_size)


def masked_count(corrupted, targets, vocab: Vocabulary) -> int:
    return sum(1 for i in targets if not vocab.is_span_sentinel(i))


def write_corruption_pair(corrupted, targets, basename) -> None:
    """``<basename>.inputs`` and ``<basename>.targets``, one id per line."""
    base = str(basename)
    Path(base + ".inputs").write_text("".join(f"{i}\n" for i in corrupted), encoding="utf-8")
    Path(base + ".targets").write_text("".join(f"{i}\n" for i in targets), encoding="utf-8")


def read_corruption_pair(basename):
    base = str(basename)
    inp = tuple(int(x) for x in Path(base + ".inputs").read_text(encoding="utf-8").split())
    tgt = tuple(int(x) for x in Path(base + ".targets").read_text(encoding="utf-8").split())
    return inp, tgt
