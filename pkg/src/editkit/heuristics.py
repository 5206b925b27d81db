"""Scalar heuristics over (source, target) pairs and the filter predicates built on them.

These drive corpus subsampling: each task or composite has a named preset of
bounds, and a pair is kept only if its heuristic profile falls inside every
bound. All functions are pure over immutable inputs and parallelize trivially
across pairs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .core import EditPair, normalize_text, tokenize


class EmptySourceError(ValueError):
    pass


class EmptyContentError(ValueError):
    """No content tokens remain after stopword removal."""


HEURISTIC_NAMES = (
    "old_word_retention",
    "char_length_ratio",
    "word_edit_distance",
    "complexity_ratio",
    "dep_depth_ratio",
)


@dataclass(frozen=True)
class HeuristicProfile:
    old_word_retention: float
    char_length_ratio: float
    word_edit_distance: int
    complexity_ratio: float
    dep_depth_ratio: float | None = None


@dataclass(frozen=True)
class Bound:
    """Closed interval constraint; None on a side means unbounded."""

    min: float | None = None
    max: float | None = None

    def __post_init__(self):
        if self.min is not None and self.max is not None and self.min > self.max:
            raise ValueError(f"bound min {self.min} > max {self.max}")

    def contains(self, value: float) -> bool:
        if self.min is not None and value < self.min:
            return False
        if self.max is not None and value > self.max:
            return False
        return True


@dataclass(frozen=True)
class FilterSpec:
    """Per-heuristic bounds. Heuristics absent from the profile are skipped."""

    bounds: dict[str, Bound]

    def __post_init__(self):
        for name in self.bounds:
            if name not in HEURISTIC_NAMES:
                raise ValueError(f"unknown heuristic {name!r}")

    @classmethod
    def from_dict(cls, raw: dict[str, dict[str, float]]) -> "FilterSpec":
        return cls({name: Bound(b.get("min"), b.get("max")) for name, b in raw.items()})


def load_filter_presets(path: str | Path | None = None) -> dict[str, FilterSpec]:
    """Named filter presets keyed by task or composite name ("gec", "gec+paraphrase", ...)."""
    if path is None:
        text = resources.files("editkit").joinpath("data/filter_presets.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)
    return {name: FilterSpec.from_dict(spec) for name, spec in raw.items()}


def old_word_retention(source: Sequence[str], target: Sequence[str]) -> float:
    """Fraction of source tokens retained in the target (multiset intersection)."""
    if not source:
        raise EmptySourceError("old_word_retention needs a non-empty source")
    remaining: dict[str, int] = {}
    for tok in target:
        remaining[tok] = remaining.get(tok, 0) + 1
    kept = 0
    for tok in source:
        if remaining.get(tok, 0) > 0:
            remaining[tok] -= 1
            kept += 1
    return kept / len(source)


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, item_a in enumerate(a, start=1):
        current = [i]
        for j, item_b in enumerate(b, start=1):
            cost = 0 if item_a == item_b else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[len(b)]


def word_edit_distance(source: Sequence[str], target: Sequence[str]) -> int:
    return edit_distance(source, target)


def char_edit_distance(source: str, target: str) -> int:
    # Character-granularity toggle of the same DP kernel.
    return edit_distance(source, target)


class FrequencyTable:
    """Token ranks derived from a two-column (token, count) frequency list.

    Out-of-vocabulary tokens get a floor rank one past the table, matching a
    configured floor frequency below every listed count.
    """

    def __init__(self, counts: dict[str, float]):
        if not counts:
            raise ValueError("frequency table is empty")
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        self._ranks = {token: rank for rank, (token, _) in enumerate(ordered, start=1)}
        self.oov_rank = len(ordered) + 1

    def rank(self, token: str) -> int:
        return self._ranks.get(token, self.oov_rank)

    def log_rank(self, token: str) -> float:
        # log1p keeps rank-1 tokens strictly positive so ratios stay defined.
        return math.log1p(self.rank(token))

    @classmethod
    def from_file(cls, path: str | Path) -> "FrequencyTable":
        counts: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'token count'")
                counts[parts[0]] = float(parts[1])
        return cls(counts)


def default_frequency_table() -> FrequencyTable:
    with resources.as_file(resources.files("editkit").joinpath("data/wordfreq.txt")) as p:
        return FrequencyTable.from_file(p)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        text = resources.files("editkit").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


_DEFAULT_STOPWORDS: frozenset[str] | None = None


def default_stopwords() -> frozenset[str]:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


def _content_tokens(tokens: Iterable[str], stopwords: frozenset[str]) -> list[str]:
    return [t for t in tokens if t not in stopwords and any(ch.isalnum() for ch in t)]


def complexity_ratio(
    source: Sequence[str],
    target: Sequence[str],
    freq: FrequencyTable,
    stopwords: frozenset[str] | None = None,
) -> float:
    """Mean log-rank of target content tokens over that of the source.

    Below 1.0 means the target leans on more frequent (simpler) vocabulary.
    """
    stopwords = default_stopwords() if stopwords is None else stopwords
    src_content = _content_tokens(source, stopwords)
    tgt_content = _content_tokens(target, stopwords)
    if not src_content or not tgt_content:
        raise EmptyContentError("no content tokens left after stopword removal")
    src_mean = sum(freq.log_rank(t) for t in src_content) / len(src_content)
    tgt_mean = sum(freq.log_rank(t) for t in tgt_content) / len(tgt_content)
    return tgt_mean / src_mean


def evaluate_profile(
    pair: EditPair,
    freq: FrequencyTable,
    stopwords: frozenset[str] | None = None,
) -> HeuristicProfile:
    """All applicable heuristics for one pair.

    dep_depth_ratio is populated only when the pair carries precomputed
    src_depth/tgt_depth annotations; no parsing happens in-process.
    """
    src_text = normalize_text(pair.source)
    tgt_text = normalize_text(pair.target)
    if not src_text:
        raise EmptySourceError("pair has an empty source")
    src_tokens = tokenize(src_text)
    tgt_tokens = tokenize(tgt_text)
    dep_ratio = None
    ann = pair.annotations or {}
    if "src_depth" in ann and "tgt_depth" in ann and ann["src_depth"] > 0:
        dep_ratio = ann["tgt_depth"] / ann["src_depth"]
    return HeuristicProfile(
        old_word_retention=old_word_retention(src_tokens, tgt_tokens),
        char_length_ratio=len(tgt_text) / len(src_text),
        word_edit_distance=word_edit_distance(src_tokens, tgt_tokens),
        complexity_ratio=complexity_ratio(src_tokens, tgt_tokens, freq, stopwords),
        dep_depth_ratio=dep_ratio,
    )


def passes(profile: HeuristicProfile, spec: FilterSpec) -> bool:
    """True iff every bounded heuristic present in the profile is within bounds."""
    for name, bound in spec.bounds.items():
        value = getattr(profile, name)
        if value is None:
            continue
        if not bound.contains(value):
            return False
    return True
