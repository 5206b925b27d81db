"""Reference-based evaluation metrics over a shared n-gram substrate.

All metrics tokenize with the shared lowercasing tokenizer so they agree with
the corpus heuristics. Kernels operate on precomputed NgramProfile values,
which makes corpus passes a single scan plus an associative reduction; every
function here is pure and thread-safe.

Score conventions:
  * every score is on a 0..100 scale;
  * edit-operation scoring (add / keep / delete) uses F1 for add and keep,
    precision only for delete, with fractional multi-reference keep counts;
  * an operation whose candidate and reference sets are both empty scores 1,
    so a perfect no-op edit against an identical reference scores 100.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

from .core import normalize_text, tokenize

NGRAM_ORDER = 4


class MetricInputError(ValueError):
    pass


@dataclass(frozen=True)
class MetricInput:
    """One evaluation item: the original text, a system output, and references."""

    source: str
    hypothesis: str
    references: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "references", tuple(self.references))


NgramCounts = tuple[Counter, ...]


def ngram_counts(tokens: Sequence[str], order: int = NGRAM_ORDER) -> NgramCounts:
    """Multiset of n-grams for each n in 1..order."""
    counts = []
    for n in range(1, order + 1):
        counts.append(Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)))
    return tuple(counts)


@dataclass(frozen=True)
class NgramProfile:
    source: NgramCounts
    hypothesis: NgramCounts
    references: tuple[NgramCounts, ...]
    source_len: int
    hypothesis_len: int
    reference_lens: tuple[int, ...]


def build_profile(item: MetricInput) -> NgramProfile:
    src = tokenize(item.source)
    hyp = tokenize(item.hypothesis)
    refs = [tokenize(r) for r in item.references]
    return NgramProfile(
        source=ngram_counts(src),
        hypothesis=ngram_counts(hyp),
        references=tuple(ngram_counts(r) for r in refs),
        source_len=len(src),
        hypothesis_len=len(hyp),
        reference_lens=tuple(len(r) for r in refs),
    )


# ---------------------------------------------------------------------------
# SARI


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio_sum(good: Counter, base: Counter) -> float:
    return sum(good[g] / base[g] for g in good)


def _sari_ngram(src: Counter, hyp: Counter, refs: Sequence[Counter]) -> tuple[float, float, float]:
    """(keep, delete, add) scores for one n-gram order."""
    numref = len(refs)
    ref_all = Counter()
    for r in refs:
        ref_all.update(r)
    src_rep = Counter({g: c * numref for g, c in src.items()})
    hyp_rep = Counter({g: c * numref for g, c in hyp.items()})

    # KEEP: fractional credit against the pooled reference counts.
    keep_cand = src_rep & hyp_rep
    keep_good = keep_cand & ref_all
    keep_ref = src_rep & ref_all
    if not keep_cand and not keep_ref:
        keep = 1.0
    else:
        precision = _ratio_sum(keep_good, keep_cand) / len(keep_cand) if keep_cand else 0.0
        recall = _ratio_sum(keep_good, keep_ref) / len(keep_ref) if keep_ref else 0.0
        keep = _f1(precision, recall)

    # DELETE: precision only.
    del_cand = src_rep - hyp_rep
    del_good = del_cand - ref_all
    del_ref = src_rep - ref_all
    if not del_cand and not del_ref:
        delete = 1.0
    else:
        delete = _ratio_sum(del_good, del_cand) / len(del_cand) if del_cand else 0.0

    # ADD: set-based.
    add_cand = set(hyp) - set(src)
    add_good = add_cand & set(ref_all)
    add_ref = set(ref_all) - set(src)
    if not add_cand and not add_ref:
        add = 1.0
    else:
        precision = len(add_good) / len(add_cand) if add_cand else 0.0
        recall = len(add_good) / len(add_ref) if add_ref else 0.0
        add = _f1(precision, recall)

    return keep, delete, add


def sari_sentence(item: MetricInput) -> float:
    """Sentence-level SARI in [0, 100]."""
    if not item.references:
        raise MetricInputError("sari requires at least one reference")
    prof = build_profile(item)
    keeps, deletes, adds = [], [], []
    for n in range(NGRAM_ORDER):
        refs_n = [r[n] for r in prof.references]
        keep, delete, add = _sari_ngram(prof.source[n], prof.hypothesis[n], refs_n)
        keeps.append(keep)
        deletes.append(delete)
        adds.append(add)
    avg = (sum(keeps) + sum(deletes) + sum(adds)) / (3 * NGRAM_ORDER)
    return 100.0 * avg


def corpus_sari(items: Iterable[MetricInput]) -> float:
    scores = [sari_sentence(item) for item in items]
    if not scores:
        raise MetricInputError("empty corpus")
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# GLEU (corpus-level, deterministic all-references variant)


def _type_diff(a: Counter, b: Counter) -> Counter:
    """Counts from a for n-gram types that never occur in b."""
    return Counter({g: c for g, c in a.items() if g not in b})


def _gleu_sentence_stats(prof: NgramProfile, ref_index: int) -> list[float]:
    stats: list[float] = [prof.hypothesis_len, prof.reference_lens[ref_index]]
    for n in range(NGRAM_ORDER):
        hyp = prof.hypothesis[n]
        ref = prof.references[ref_index][n]
        src_only = _type_diff(prof.source[n], ref)
        matched = sum((hyp & ref).values()) - sum((hyp & src_only).values())
        stats.append(max(matched, 0))
        stats.append(max(prof.hypothesis_len + 1 - (n + 1), 0))
    return stats


def _gleu_from_stats(stats: Sequence[float]) -> float:
    if any(s == 0 for s in stats):
        return 0.0
    c, r = stats[0], stats[1]
    log_prec = sum(math.log(num / den) for num, den in zip(stats[2::2], stats[3::2])) / NGRAM_ORDER
    return math.exp(min(0.0, 1.0 - r / c) + log_prec)


def corpus_gleu(items: Sequence[MetricInput]) -> float:
    """Corpus GLEU in [0, 100]: n-gram precision that credits reference n-grams
    and penalizes n-grams retained from the source that no reference keeps,
    with a brevity penalty, averaged over reference assignments.

    Sentences may carry different reference counts; assignment r uses each
    sentence's reference r modulo its own count.
    """
    items = list(items)
    if not items:
        raise MetricInputError("empty corpus")
    profiles = []
    for item in items:
        if not item.references:
            raise MetricInputError("gleu requires at least one reference per item")
        profiles.append(build_profile(item))
    rounds = max(len(p.references) for p in profiles)
    scores = []
    for r in range(rounds):
        totals = [0.0] * (2 + 2 * NGRAM_ORDER)
        for prof in profiles:
            stats = _gleu_sentence_stats(prof, r % len(prof.references))
            totals = [t + s for t, s in zip(totals, stats)]
        scores.append(_gleu_from_stats(totals))
    return 100.0 * sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# ExactMatch


def exact_match(items: Sequence[MetricInput]) -> float:
    """Percentage of hypotheses whose normalized text equals the canonical target."""
    if not items:
        raise MetricInputError("empty corpus")
    hits = 0
    for item in items:
        if not item.references:
            raise MetricInputError("exact_match requires a canonical target (references[0])")
        if normalize_text(item.hypothesis) == normalize_text(item.references[0]):
            hits += 1
    return 100.0 * hits / len(items)


# ---------------------------------------------------------------------------
# BLEU / Self-BLEU

AgainstMode = Literal["source", "references"]


def _comparison_texts(item: MetricInput, against: AgainstMode) -> tuple[str, ...]:
    if against == "source":
        return (item.source,)
    if not item.references:
        raise MetricInputError("self_bleu against references needs a non-empty reference list")
    return item.references


def _bleu_sentence_stats(hyp_tokens: list[str], ref_token_lists: list[list[str]]) -> list[float]:
    hyp_len = len(hyp_tokens)
    # Closest reference length breaks ties toward the shorter reference.
    ref_len = min((abs(len(r) - hyp_len), len(r)) for r in ref_token_lists)[1]
    stats: list[float] = [hyp_len, ref_len]
    hyp_counts = ngram_counts(hyp_tokens)
    ref_counts = [ngram_counts(r) for r in ref_token_lists]
    for n in range(NGRAM_ORDER):
        clip = Counter()
        for rc in ref_counts:
            clip |= rc[n]
        stats.append(sum((hyp_counts[n] & clip).values()))
        stats.append(max(hyp_len + 1 - (n + 1), 0))
    return stats


def _bleu_from_stats(stats: Sequence[float], effective_order: bool = False) -> float:
    c, r = stats[0], stats[1]
    if c == 0:
        return 0.0
    log_precs = []
    for num, den in zip(stats[2::2], stats[3::2]):
        if den == 0:
            if effective_order:
                continue
            return 0.0
        if num == 0:
            return 0.0
        log_precs.append(math.log(num / den))
    if not log_precs:
        return 0.0
    bp = math.exp(min(0.0, 1.0 - r / c))
    return math.exp(sum(log_precs) / len(log_precs)) * bp


def self_bleu(item: MetricInput, against: AgainstMode = "source") -> float:
    """Sentence-level 4-gram BLEU of the hypothesis against source or references.

    Lower means more rewording. Orders longer than the hypothesis are dropped
    from the geometric mean so short identical sentences still score 100.
    """
    refs = [tokenize(t) for t in _comparison_texts(item, against)]
    stats = _bleu_sentence_stats(tokenize(item.hypothesis), refs)
    return 100.0 * _bleu_from_stats(stats, effective_order=True)


def corpus_self_bleu(items: Sequence[MetricInput], against: AgainstMode = "source") -> float:
    """Corpus-level 4-gram BLEU with the standard brevity penalty (no smoothing)."""
    items = list(items)
    if not items:
        raise MetricInputError("empty corpus")
    totals = [0.0] * (2 + 2 * NGRAM_ORDER)
    for item in items:
        refs = [tokenize(t) for t in _comparison_texts(item, against)]
        stats = _bleu_sentence_stats(tokenize(item.hypothesis), refs)
        totals = [t + s for t, s in zip(totals, stats)]
    return 100.0 * _bleu_from_stats(totals)


# ---------------------------------------------------------------------------
# Compression ratio


def compression_ratio(items: Sequence[MetricInput]) -> float:
    """Mean percentage reduction in token count, clamped below at 0 per item."""
    items = list(items)
    if not items:
        raise MetricInputError("empty corpus")
    ratios = []
    for item in items:
        src_len = len(tokenize(item.source))
        if src_len == 0:
            raise MetricInputError("compression_ratio requires non-empty sources")
        hyp_len = len(tokenize(item.hypothesis))
        ratios.append(max(0.0, 1.0 - hyp_len / src_len))
    return 100.0 * sum(ratios) / len(ratios)
