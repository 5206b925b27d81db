"""Corpus adapters: one registered reader per source-corpus layout.

Every corpus ships in its own column layout, so ingestion goes through a
registry keyed by corpus_id. Adapters normalize text, validate pairs, and
preserve the original train/validation/test split labels. Licensed corpora
(Newsela, GYAFC, ...) are not redistributed; the adapters only read local
copies the user has obtained.

Expected layouts (see README for the full table):
  jsonl      one JSON object per line: source, target, optional task /
             split / references / annotations
  tsv        two tab-separated columns: source, target
  m2         M2 error-correction format (S line + A edit lines); the target
             applies annotator 0's edits
  lang8      two-or-more tab-separated columns: learner text, correction(s)
  discofuse  TSV with header; incoherent sentence pair -> coherent fusion
  gyafc      directory with parallel `informal` / `formal` files per split
  wnc        TSV: id, source tokens, target tokens[, source raw, target raw]
  parabankv2 TSV: score, sentence, paraphrase[, more paraphrases]
  newsela    TSV: complex sentence, simple sentence
  wikilarge  parallel files <base>.src / <base>.dst
  wikiauto   TSV: complex sentence, simple sentence
  iterater   one JSON object per line: before_sent, after_sent, labels
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .core import EditPair, EditTask, Split, TaskLike, ValidationError, normalize_text, parse_task


class UnknownCorpusError(KeyError):
    pass


class CorpusFormatError(ValueError):
    """Malformed corpus content, pointing at the offending line."""

    def __init__(self, path: str | Path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


Adapter = Callable[[Path, TaskLike, Split], Iterator[EditPair]]

_ADAPTERS: dict[str, Adapter] = {}


def register_adapter(corpus_id: str):
    def wrap(fn: Adapter) -> Adapter:
        _ADAPTERS[corpus_id] = fn
        return fn
    return wrap


def registered_corpora() -> tuple[str, ...]:
    return tuple(sorted(_ADAPTERS))


def ingest(corpus_id: str, path: str | Path, task: TaskLike, split: Split) -> list[EditPair]:
    """Read one corpus file into validated, normalized EditPairs."""
    adapter = _ADAPTERS.get(corpus_id)
    if adapter is None:
        raise UnknownCorpusError(
            f"no adapter registered for corpus {corpus_id!r}; known: {registered_corpora()}"
        )
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"corpus file not found: {p}")
    return list(adapter(p, task, split))


def _make_pair(
    path: Path,
    lineno: int,
    source: str,
    target: str,
    task: TaskLike,
    split: Split,
    corpus_id: str,
    references: tuple[str, ...] | None = None,
    annotations: dict[str, float] | None = None,
) -> EditPair:
    try:
        return EditPair(
            source=normalize_text(source),
            target=normalize_text(target),
            task=task,
            corpus_id=corpus_id,
            split=split,
            references=tuple(normalize_text(r) for r in references) if references else None,
            annotations=annotations,
        )
    except ValidationError as exc:
        raise CorpusFormatError(path, lineno, str(exc)) from exc


def _read_lines(path: Path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            yield lineno, line.rstrip("\n")


@register_adapter("jsonl")
def _jsonl_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    for lineno, line in _read_lines(path):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(path, lineno, f"invalid JSON: {exc}") from exc
        if "source" not in rec or "target" not in rec:
            raise CorpusFormatError(path, lineno, "missing source/target field")
        rec_task = parse_task(rec["task"]) if rec.get("task") else task
        rec_split = Split(rec["split"]) if rec.get("split") else split
        refs = tuple(rec["references"]) if rec.get("references") else None
        ann = {k: float(v) for k, v in rec["annotations"].items()} if rec.get("annotations") else None
        yield _make_pair(path, lineno, rec["source"], rec["target"], rec_task, rec_split,
                         "jsonl", references=refs, annotations=ann)


def _tsv_pairs(path: Path, task: TaskLike, split: Split, corpus_id: str,
               src_col: int, tgt_col: int, min_cols: int | None = None,
               skip_header: bool = False) -> Iterator[EditPair]:
    min_cols = max(src_col, tgt_col) + 1 if min_cols is None else min_cols
    for lineno, line in _read_lines(path):
        if skip_header and lineno == 1:
            continue
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < min_cols:
            raise CorpusFormatError(path, lineno, f"expected >= {min_cols} columns, got {len(cols)}")
        yield _make_pair(path, lineno, cols[src_col], cols[tgt_col], task, split, corpus_id)


@register_adapter("tsv")
def _tsv_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    yield from _tsv_pairs(path, task, split, "tsv", 0, 1)


@register_adapter("lang8")
def _lang8_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    # Learner sentence, first correction; uncorrected lines are skipped.
    for lineno, line in _read_lines(path):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            continue
        yield _make_pair(path, lineno, cols[0], cols[1], task, split, "lang8")


def _apply_m2_edits(tokens: list[str], edits: list[tuple[int, int, str]]) -> list[str]:
    out = list(tokens)
    for start, end, replacement in sorted(edits, key=lambda e: e[0], reverse=True):
        rep = replacement.split() if replacement and replacement != "-NONE-" else []
        out[start:end] = rep
    return out


def _m2_blocks(path: Path, task: TaskLike, split: Split, corpus_id: str) -> Iterator[EditPair]:
    source_tokens: list[str] | None = None
    edits: list[tuple[int, int, str]] = []
    start_line = 0
    for lineno, line in _read_lines(path):
        if line.startswith("S "):
            if source_tokens is not None:
                target = " ".join(_apply_m2_edits(source_tokens, edits))
                yield _make_pair(path, start_line, " ".join(source_tokens), target, task, split, corpus_id)
            source_tokens = line[2:].split()
            edits = []
            start_line = lineno
        elif line.startswith("A "):
            if source_tokens is None:
                raise CorpusFormatError(path, lineno, "edit line before any source line")
            fields = line[2:].split("|||")
            if len(fields) < 3:
                raise CorpusFormatError(path, lineno, "malformed M2 edit line")
            span = fields[0].split()
            if len(span) != 2:
                raise CorpusFormatError(path, lineno, "malformed M2 edit span")
            annotator = fields[5].strip() if len(fields) > 5 else "0"
            if annotator != "0" or fields[1] == "noop":
                continue
            edits.append((int(span[0]), int(span[1]), fields[2]))
    if source_tokens is not None:
        target = " ".join(_apply_m2_edits(source_tokens, edits))
        yield _make_pair(path, start_line, " ".join(source_tokens), target, task, split, corpus_id)


@register_adapter("nucle")
def _nucle_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    yield from _m2_blocks(path, task, split, "nucle")


@register_adapter("bea19")
def _bea19_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    yield from _m2_blocks(path, task, split, "bea19")


@register_adapter("discofuse")
def _discofuse_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        required = {"coherent_first_sentence", "coherent_second_sentence",
                    "incoherent_first_sentence", "incoherent_second_sentence"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CorpusFormatError(path, 1, f"missing DiscoFuse columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            source = f"{row['incoherent_first_sentence']} {row['incoherent_second_sentence']}".strip()
            target = f"{row['coherent_first_sentence']} {row['coherent_second_sentence']}".strip()
            yield _make_pair(path, lineno, source, target, task, split, "discofuse")


@register_adapter("gyafc")
def _gyafc_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    # `path` points at the informal file; the formal file sits next to it.
    informal = path
    formal = path.with_name(path.name.replace("informal", "formal"))
    if informal == formal or not formal.exists():
        raise CorpusFormatError(path, 0, "expected a sibling 'formal' file next to the informal file")
    ref_files = sorted(informal.parent.glob(formal.name + ".ref*"))
    refs_per_line: list[list[str]] = []
    for rf in ref_files:
        for i, (_, text) in enumerate(_read_lines(rf)):
            while len(refs_per_line) <= i:
                refs_per_line.append([])
            refs_per_line[i].append(text)
    formal_lines = [text for _, text in _read_lines(formal)]
    for lineno, line in _read_lines(informal):
        idx = lineno - 1
        if idx >= len(formal_lines):
            raise CorpusFormatError(path, lineno, "informal/formal files have different lengths")
        refs = None
        if idx < len(refs_per_line) and refs_per_line[idx]:
            refs = tuple([formal_lines[idx]] + refs_per_line[idx])
        yield _make_pair(path, lineno, line, formal_lines[idx], task, split, "gyafc", references=refs)


@register_adapter("wnc")
def _wnc_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    # Columns: id, source tokens, target tokens[, source raw, target raw, ...]
    for lineno, line in _read_lines(path):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 3:
            raise CorpusFormatError(path, lineno, f"expected >= 3 columns, got {len(cols)}")
        source, target = (cols[3], cols[4]) if len(cols) >= 5 else (cols[1], cols[2])
        yield _make_pair(path, lineno, source, target, task, split, "wnc")


@register_adapter("parabankv2")
def _parabankv2_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    yield from _tsv_pairs(path, task, split, "parabankv2", 1, 2)


@register_adapter("newsela")
def _newsela_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    yield from _tsv_pairs(path, task, split, "newsela", 0, 1)


@register_adapter("wikiauto")
def _wikiauto_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    yield from _tsv_pairs(path, task, split, "wikiauto", 0, 1)


@register_adapter("wikilarge")
def _wikilarge_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    src_path = path if path.suffix == ".src" else path.with_suffix(".src")
    dst_path = src_path.with_suffix(".dst")
    if not dst_path.exists():
        raise CorpusFormatError(path, 0, f"expected parallel file {dst_path.name}")
    dst_lines = [text for _, text in _read_lines(dst_path)]
    for lineno, line in _read_lines(src_path):
        if lineno - 1 >= len(dst_lines):
            raise CorpusFormatError(src_path, lineno, ".src/.dst files have different lengths")
        yield _make_pair(src_path, lineno, line, dst_lines[lineno - 1], task, split, "wikilarge")


@register_adapter("jfleg")
def _jfleg_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    # `path` points at the .src file; references live in sibling .ref0..refN
    # files. The first reference doubles as the target.
    if path.suffix != ".src":
        raise CorpusFormatError(path, 0, "expected the .src file of a parallel release")
    ref_files = sorted(path.parent.glob(path.stem + ".ref*"))
    if not ref_files:
        raise CorpusFormatError(path, 0, "no sibling .ref* files found")
    ref_lines = [[text for _, text in _read_lines(rf)] for rf in ref_files]
    for lineno, line in _read_lines(path):
        idx = lineno - 1
        refs = []
        for rl in ref_lines:
            if idx >= len(rl):
                raise CorpusFormatError(path, lineno, "source/reference files have different lengths")
            refs.append(rl[idx])
        yield _make_pair(path, lineno, line, refs[0], task, split, "jfleg",
                         references=tuple(refs))


_ITERATER_INTENTS = {
    "fluency": EditTask.GEC,
    "coherence": EditTask.COHERENCE,
    "clarity": EditTask.CLARITY,
}


@register_adapter("iterater")
def _iterater_adapter(path: Path, task: TaskLike, split: Split) -> Iterator[EditPair]:
    # Revision pairs labeled with edit intents; only intents with a mapped
    # task are kept, and the record's own intent overrides `task`.
    for lineno, line in _read_lines(path):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(path, lineno, f"invalid JSON: {exc}") from exc
        if "before_sent" not in rec or "after_sent" not in rec:
            raise CorpusFormatError(path, lineno, "missing before_sent/after_sent field")
        label = rec.get("labels") or rec.get("label") or ""
        intent = _ITERATER_INTENTS.get(str(label).lower())
        if intent is None:
            continue
        yield _make_pair(path, lineno, rec["before_sent"], rec["after_sent"], intent, split, "iterater")


def ingest_many(sources: Iterable[tuple[str, str | Path]], task: TaskLike, split: Split) -> list[EditPair]:
    pairs: list[EditPair] = []
    for corpus_id, path in sources:
        pairs.extend(ingest(corpus_id, path, task, split))
    return pairs
