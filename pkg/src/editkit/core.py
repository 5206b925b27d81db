"""Shared domain types: edit tasks, corpus pairs, instruction records, score reports.

Everything here is immutable after construction and safe to hand to worker
threads. The only behavior is construction, validation, normalization /
tokenization, and (de)serialization to the JSON-lines record format.
"""
from __future__ import annotations

import hashlib
import json
import random
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator


class ValidationError(ValueError):
    """Invariant violation, carrying the offending field name."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class EditTask(str, Enum):
    """Edit intention behind a revision.

    The first seven kinds are the in-domain training tasks; COMPRESSION and
    POLITENESS are adjacent tasks used only for generalization evaluation.
    """

    GEC = "gec"
    COHERENCE = "coherence"
    CLARITY = "clarity"
    SIMPLIFICATION = "simplification"
    PARAPHRASE = "paraphrase"
    FORMALIZE = "formalize"
    NEUTRALIZE = "neutralize"
    COMPRESSION = "compression"
    POLITENESS = "politeness"


IN_DOMAIN_TASKS = (
    EditTask.GEC,
    EditTask.COHERENCE,
    EditTask.CLARITY,
    EditTask.SIMPLIFICATION,
    EditTask.PARAPHRASE,
    EditTask.FORMALIZE,
    EditTask.NEUTRALIZE,
)

OUT_OF_DOMAIN_TASKS = (EditTask.COMPRESSION, EditTask.POLITENESS)

# Tag tokens for prefix-mode inputs, e.g. "<gec> <source text>".
PREFIX_TAGS = {
    EditTask.GEC: "gec",
    EditTask.SIMPLIFICATION: "simplify",
    EditTask.CLARITY: "clarify",
    EditTask.COHERENCE: "coherence",
    EditTask.FORMALIZE: "formalize",
    EditTask.NEUTRALIZE: "neutralize",
    EditTask.PARAPHRASE: "paraphrase",
    EditTask.COMPRESSION: "compress",
    EditTask.POLITENESS: "politeness",
}

# Rendered instruction ends with a colon, then one space before the source.
INSTRUCTION_SEPARATOR = ": "


@dataclass(frozen=True)
class CompositeTask:
    """An ordered combination of two or three distinct edit tasks."""

    tasks: tuple[EditTask, ...]

    def __post_init__(self):
        if len(self.tasks) not in (2, 3):
            raise ValidationError("tasks", f"composite needs 2 or 3 tasks, got {len(self.tasks)}")
        if len(set(self.tasks)) != len(self.tasks):
            raise ValidationError("tasks", "duplicate task kinds in composite")
        object.__setattr__(self, "tasks", tuple(EditTask(t) for t in self.tasks))

    @property
    def value(self) -> str:
        return "+".join(t.value for t in self.tasks)

    def __str__(self) -> str:
        return self.value


TaskLike = EditTask | CompositeTask


def parse_task(raw: str) -> TaskLike:
    """Parse "gec" into an EditTask, "gec+simplification" into a CompositeTask."""
    parts = raw.split("+")
    if len(parts) == 1:
        try:
            return EditTask(parts[0])
        except ValueError:
            raise ValidationError("task", f"unknown task kind {raw!r}") from None
    return CompositeTask(tuple(EditTask(p) for p in parts))


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class BuildMode(str, Enum):
    INSTRUCTION = "instruction"
    PREFIX = "prefix"
    RANDOMIZED = "randomized"


@dataclass(frozen=True)
class NormalizationPolicy:
    """How raw text is cleaned before it enters the pipeline.

    unicode_form of None skips unicode normalization entirely.
    """

    unicode_form: str | None = "NFC"
    collapse_whitespace: bool = True
    lowercase: bool = False


DEFAULT_NORMALIZATION = NormalizationPolicy()


def normalize_text(raw: str, policy: NormalizationPolicy = DEFAULT_NORMALIZATION) -> str:
    """Normalize raw text. Deterministic and idempotent; empty in, empty out."""
    text = raw
    if policy.unicode_form:
        text = unicodedata.normalize(policy.unicode_form, text)
    if policy.collapse_whitespace:
        text = " ".join(text.split())
    if policy.lowercase:
        text = text.lower()
    return text


def _is_splittable_punct(ch: str) -> bool:
    # Apostrophe is excluded: it is handled by the contraction rule, and
    # peeling it would break the re-tokenization fixed point for "'t".
    return not ch.isalnum() and ch != "'"


def _split_chunk(chunk: str) -> list[str]:
    lead: list[str] = []
    while len(chunk) > 1 and _is_splittable_punct(chunk[0]):
        lead.append(chunk[0])
        chunk = chunk[1:]
    trail: list[str] = []
    while len(chunk) > 1 and _is_splittable_punct(chunk[-1]):
        trail.append(chunk[-1])
        chunk = chunk[:-1]
    # Contractions split at the apostrophe, which stays glued to the suffix:
    # "don't" -> ["don", "'t"]. Split parts are re-processed so punctuation
    # they expose is peeled too, keeping re-tokenization a fixed point.
    parts: list[str] = []
    start = 0
    for i, ch in enumerate(chunk):
        if ch == "'" and i > start:
            parts.append(chunk[start:i])
            start = i
    parts.append(chunk[start:])
    if len(parts) > 1:
        mids: list[str] = []
        for part in parts:
            if part:
                mids.extend(_split_chunk(part))
    else:
        mids = [p for p in parts if p]
    return lead + mids + trail[::-1]


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace-and-punctuation tokenization.

    Leading/trailing punctuation of each whitespace chunk becomes separate
    single-character tokens; contractions split at the apostrophe. Joining
    the result with single spaces and re-tokenizing is a fixed point, which
    keeps every n-gram metric and heuristic in the toolkit consistent.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        tokens.extend(_split_chunk(chunk))
    return tokens


def _task_to_json(task: TaskLike) -> str:
    return task.value


@dataclass(frozen=True)
class EditPair:
    """One (source, target) pair from a parallel edit corpus."""

    source: str
    target: str
    task: TaskLike
    corpus_id: str
    split: Split
    references: tuple[str, ...] | None = None
    annotations: dict[str, float] | None = None

    def __post_init__(self):
        if not normalize_text(self.source):
            raise ValidationError("source", "empty after normalization")
        if self.references is not None:
            object.__setattr__(self, "references", tuple(self.references))
            if len(self.references) == 0:
                raise ValidationError("references", "must be non-empty when present")
            if self.target != self.references[0]:
                raise ValidationError("target", "must equal references[0] when references are present")

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "source": self.source,
            "target": self.target,
            "task": _task_to_json(self.task),
            "corpus_id": self.corpus_id,
            "split": self.split.value,
        }
        if self.references is not None:
            rec["references"] = list(self.references)
        if self.annotations is not None:
            rec["annotations"] = dict(self.annotations)
        return rec

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "EditPair":
        return cls(
            source=rec["source"],
            target=rec["target"],
            task=parse_task(rec["task"]),
            corpus_id=rec["corpus_id"],
            split=Split(rec["split"]),
            references=tuple(rec["references"]) if rec.get("references") is not None else None,
            annotations=dict(rec["annotations"]) if rec.get("annotations") is not None else None,
        )


@dataclass(frozen=True)
class InstructionInstance:
    """An EditPair wrapped with a rendered instruction; the unit of emitted data.

    ``input`` is exactly the text presented to a model: in instruction mode
    the instruction, then ": ", then the source; in prefix mode the task tag
    token, a space, then the source.
    """

    instruction: str
    input: str
    target: str
    task: TaskLike
    mode: BuildMode
    corpus_id: str
    split: Split
    references: tuple[str, ...] | None = None
    seed_trace: dict[str, Any] | None = None

    def __post_init__(self):
        if self.references is not None:
            object.__setattr__(self, "references", tuple(self.references))
        if self.mode is BuildMode.PREFIX:
            if not self.input.startswith("<"):
                raise ValidationError("input", "prefix-mode input must start with a task tag token")
        elif not self.input.startswith(self.instruction + INSTRUCTION_SEPARATOR):
            raise ValidationError("input", "input must start with instruction + separator")

    @property
    def source(self) -> str:
        if self.mode is BuildMode.PREFIX:
            # instruction holds the full tag string, possibly several tags
            return self.input[len(self.instruction) + 1:]
        return self.input[len(self.instruction) + len(INSTRUCTION_SEPARATOR):]

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "instruction": self.instruction,
            "input": self.input,
            "target": self.target,
            "task": _task_to_json(self.task),
            "mode": self.mode.value,
            "corpus_id": self.corpus_id,
            "split": self.split.value,
            "references": list(self.references) if self.references is not None else None,
        }
        if self.seed_trace is not None:
            rec["seed_trace"] = dict(self.seed_trace)
        return rec

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "InstructionInstance":
        return cls(
            instruction=rec["instruction"],
            input=rec["input"],
            target=rec["target"],
            task=parse_task(rec["task"]),
            mode=BuildMode(rec["mode"]),
            corpus_id=rec["corpus_id"],
            split=Split(rec["split"]),
            references=tuple(rec["references"]) if rec.get("references") is not None else None,
            seed_trace=rec.get("seed_trace"),
        )


@dataclass(frozen=True)
class ScoreRow:
    dataset_id: str
    metric_name: str
    value: float | None
    error: str | None = None


@dataclass(frozen=True)
class ScoreReport:
    """Per-system metric table: one row per (dataset, metric)."""

    system_id: str
    rows: tuple[ScoreRow, ...]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        keys = [(r.dataset_id, r.metric_name) for r in self.rows]
        if len(keys) != len(set(keys)):
            raise ValidationError("rows", "duplicate (dataset_id, metric_name) key")

    def value(self, dataset_id: str, metric_name: str) -> float | None:
        for row in self.rows:
            if row.dataset_id == dataset_id and row.metric_name == metric_name:
                return row.value
        raise KeyError((dataset_id, metric_name))

    def to_record(self) -> dict[str, Any]:
        return {
            "system_id": self.system_id,
            "rows": [
                {
                    "dataset_id": r.dataset_id,
                    "metric_name": r.metric_name,
                    "value": r.value,
                    "error": r.error,
                }
                for r in self.rows
            ],
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "ScoreReport":
        return cls(
            system_id=rec["system_id"],
            rows=tuple(
                ScoreRow(r["dataset_id"], r["metric_name"], r["value"], r.get("error"))
                for r in rec["rows"]
            ),
            metadata=dict(rec.get("metadata", {})),
        )


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    """Yield one JSON object per non-empty line; errors carry the line number."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield obj


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def derive_rng(master_seed: int, *labels: str) -> random.Random:
    """Independent RNG stream derived from the master seed by a labeled hash.

    Streams with different labels never share state, so e.g. pair sampling
    stays identical when only the instruction-rendering stream changes.
    """
    digest = hashlib.sha256(("%d/" % master_seed + "/".join(labels)).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
