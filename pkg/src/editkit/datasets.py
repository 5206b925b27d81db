"""Evaluation test-set loaders and download helpers.

Loaders turn an on-disk test set into aligned MetricInput items (hypotheses
empty until a system fills them). Each loader expects the dataset's public
release layout under ``<data_root>/<dataset_id>/``. ``fetch`` downloads the
freely redistributable sets; GYAFC and Newsela are gated behind access
agreements and must be placed manually, and WNC / MRPC ship from project
pages whose terms the user accepts by downloading.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .core import EditTask, TaskLike, parse_task
from .metrics import MetricInput


class DatasetNotFoundError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class EvalData:
    """Loaded test items, optionally with a per-item task override."""

    items: tuple[MetricInput, ...]
    tasks: tuple[TaskLike, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.tasks is not None:
            object.__setattr__(self, "tasks", tuple(self.tasks))
            if len(self.tasks) != len(self.items):
                raise ValueError("per-item task list must match item count")


Loader = Callable[[Path], EvalData]

_LOADERS: dict[str, Loader] = {}


def register_loader(dataset_id: str):
    def wrap(fn: Loader) -> Loader:
        _LOADERS[dataset_id] = fn
        return fn
    return wrap


def registered_loaders() -> tuple[str, ...]:
    return tuple(sorted(_LOADERS))


def load_eval_dataset(loader_id: str, path: str | Path) -> EvalData:
    loader = _LOADERS.get(loader_id)
    if loader is None:
        raise KeyError(f"no loader {loader_id!r}; known: {registered_loaders()}")
    root = Path(path)
    if not root.exists():
        raise DatasetNotFoundError(
            f"dataset not found under {root}; run `editkit fetch-data` or place the "
            "files manually (see README)"
        )
    return loader(root)


def _lines(path: Path) -> list[str]:
    if not path.exists():
        raise DatasetNotFoundError(f"missing file {path}")
    return path.read_text(encoding="utf-8").rstrip("\n").split("\n")


def _from_parallel(src: list[str], ref_lists: list[list[str]]) -> EvalData:
    for refs in ref_lists:
        if len(refs) != len(src):
            raise ValueError("reference file length does not match source length")
    return EvalData(
        tuple(
            MetricInput(source=s, hypothesis="", references=tuple(refs[i] for refs in ref_lists))
            for i, s in enumerate(src)
        )
    )


@register_loader("jfleg")
def _load_jfleg(root: Path) -> EvalData:
    src = _lines(root / "test.src")
    refs = [_lines(root / f"test.ref{i}") for i in range(4)]
    return _from_parallel(src, refs)


@register_loader("asset")
def _load_asset(root: Path) -> EvalData:
    src = _lines(root / "asset.test.orig")
    refs = [_lines(root / f"asset.test.simp.{i}") for i in range(10)]
    return _from_parallel(src, refs)


@register_loader("turkcorpus")
def _load_turkcorpus(root: Path) -> EvalData:
    src = _lines(root / "test.8turkers.tok.norm")
    refs = [_lines(root / f"test.8turkers.tok.turk.{i}") for i in range(8)]
    return _from_parallel(src, refs)


@register_loader("wnc")
def _load_wnc(root: Path) -> EvalData:
    items = []
    for line in _lines(root / "biased.word.test"):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 3:
            raise ValueError(f"wnc: expected >= 3 columns, got {len(cols)}")
        source, target = (cols[3], cols[4]) if len(cols) >= 5 else (cols[1], cols[2])
        items.append(MetricInput(source=source, hypothesis="", references=(target,)))
    return EvalData(tuple(items))


@register_loader("gyafc")
def _load_gyafc(root: Path) -> EvalData:
    # Test split layout: informal + formal.ref0..3.
    src = _lines(root / "informal")
    refs = [_lines(root / f"formal.ref{i}") for i in range(4)]
    return _from_parallel(src, refs)


@register_loader("mrpc")
def _load_mrpc(root: Path) -> EvalData:
    items = []
    path = root / "msr_paraphrase_test.txt"
    for lineno, line in enumerate(_lines(path), start=1):
        if lineno == 1 or not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 5:
            raise ValueError(f"{path}:{lineno}: expected 5 columns")
        if cols[0].strip() == "1":
            items.append(MetricInput(source=cols[3], hypothesis="", references=(cols[4],)))
    return EvalData(tuple(items))


@register_loader("sts")
def _load_sts(root: Path) -> EvalData:
    # SemEval STS benchmark test file; pairs scoring >= 4 count as paraphrases.
    items = []
    path = root / "sts-test.csv"
    if not path.exists():
        raise DatasetNotFoundError(f"missing file {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), start=1):
            if len(row) < 7:
                continue
            try:
                score = float(row[4])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad similarity score {row[4]!r}") from None
            if score >= 4.0:
                items.append(MetricInput(source=row[5], hypothesis="", references=(row[6],)))
    return EvalData(tuple(items))


@register_loader("qqp")
def _load_qqp(root: Path) -> EvalData:
    items = []
    path = root / "quora_duplicate_questions.tsv"
    if not path.exists():
        raise DatasetNotFoundError(f"missing file {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        for row in reader:
            if row.get("is_duplicate", "").strip() == "1":
                items.append(MetricInput(source=row["question1"], hypothesis="",
                                         references=(row["question2"],)))
    return EvalData(tuple(items))


@register_loader("compression")
def _load_compression(root: Path) -> EvalData:
    items = []
    path = root / "compression.test.jsonl"
    for lineno, line in enumerate(_lines(path), start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        source = rec.get("sentence") or rec.get("source")
        target = rec.get("compression") or rec.get("target")
        if not source or not target:
            raise ValueError(f"{path}:{lineno}: missing sentence/compression")
        items.append(MetricInput(source=source, hypothesis="", references=(target,)))
    return EvalData(tuple(items))


@register_loader("politeness")
def _load_politeness(root: Path) -> EvalData:
    # Reference-free: scored with Self-BLEU against the source + a transfer classifier.
    items = [MetricInput(source=line, hypothesis="") for line in _lines(root / "test.txt") if line.strip()]
    return EvalData(tuple(items))


_ITERATER_INTENTS = {
    "fluency": EditTask.GEC,
    "coherence": EditTask.COHERENCE,
    "clarity": EditTask.CLARITY,
}


def _iterater_records(root: Path, keep: str | None = None):
    for line in _lines(root / "test.jsonl"):
        if not line.strip():
            continue
        rec = json.loads(line)
        label = str(rec.get("labels") or rec.get("label") or "").lower()
        if keep is not None and label != keep:
            continue
        yield rec, label


@register_loader("iterater")
def _load_iterater(root: Path) -> EvalData:
    # Full set; per-item tasks follow each record's intent label (style
    # intents fall back to paraphrase).
    items, tasks = [], []
    for rec, label in _iterater_records(root):
        items.append(MetricInput(source=rec["before_sent"], hypothesis="",
                                 references=(rec["after_sent"],)))
        tasks.append(_ITERATER_INTENTS.get(label, EditTask.PARAPHRASE))
    return EvalData(tuple(items), tuple(tasks))


def _iterater_subset(root: Path, label: str) -> EvalData:
    items = [
        MetricInput(source=rec["before_sent"], hypothesis="", references=(rec["after_sent"],))
        for rec, _ in _iterater_records(root, keep=label)
    ]
    return EvalData(tuple(items))


@register_loader("iterater_fluency")
def _load_iterater_fluency(root: Path) -> EvalData:
    return _iterater_subset(root, "fluency")


@register_loader("iterater_clarity")
def _load_iterater_clarity(root: Path) -> EvalData:
    return _iterater_subset(root, "clarity")


@register_loader("iterater_coherence")
def _load_iterater_coherence(root: Path) -> EvalData:
    return _iterater_subset(root, "coherence")


@register_loader("discofuse")
def _load_discofuse(root: Path) -> EvalData:
    items = []
    path = root / "test.tsv"
    if not path.exists():
        raise DatasetNotFoundError(f"missing file {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        for row in reader:
            source = f"{row['incoherent_first_sentence']} {row['incoherent_second_sentence']}".strip()
            target = f"{row['coherent_first_sentence']} {row['coherent_second_sentence']}".strip()
            items.append(MetricInput(source=source, hypothesis="", references=(target,)))
    return EvalData(tuple(items))


@register_loader("jsonl_eval")
def _load_jsonl_eval(root: Path) -> EvalData:
    """Generic layout: <root>/test.jsonl with source / references (or target) / task."""
    items, tasks, any_task = [], [], False
    path = root / "test.jsonl"
    for lineno, line in enumerate(_lines(path), start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        refs = rec.get("references") or ([rec["target"]] if rec.get("target") else [])
        items.append(MetricInput(source=rec["source"], hypothesis="", references=tuple(refs)))
        if rec.get("task"):
            any_task = True
            tasks.append(parse_task(rec["task"]))
        else:
            tasks.append(None)
    if any_task and any(t is None for t in tasks):
        raise ValueError(f"{path}: either all records carry a task or none do")
    return EvalData(tuple(items), tuple(tasks) if any_task else None)


# ---------------------------------------------------------------------------
# Downloads

_JFLEG_BASE = "https://raw.githubusercontent.com/keisks/jfleg/master/test"
_ASSET_BASE = "https://raw.githubusercontent.com/facebookresearch/asset/main/dataset"
_TURK_BASE = "https://raw.githubusercontent.com/cocoxu/simplification/master/data/turkcorpus"

FETCHABLE: dict[str, list[tuple[str, str]]] = {
    "jfleg": [(f"{_JFLEG_BASE}/test.src", "test.src")]
    + [(f"{_JFLEG_BASE}/test.ref{i}", f"test.ref{i}") for i in range(4)],
    "asset": [(f"{_ASSET_BASE}/asset.test.orig", "asset.test.orig")]
    + [(f"{_ASSET_BASE}/asset.test.simp.{i}", f"asset.test.simp.{i}") for i in range(10)],
    "turkcorpus": [(f"{_TURK_BASE}/test.8turkers.tok.norm", "test.8turkers.tok.norm")]
    + [(f"{_TURK_BASE}/test.8turkers.tok.turk.{i}", f"test.8turkers.tok.turk.{i}") for i in range(8)],
    "mrpc": [(
        "https://dl.fbaipublicfiles.com/senteval/senteval_data/msr_paraphrase_test.txt",
        "msr_paraphrase_test.txt",
    )],
}


def fetch(dataset_id: str, data_root: str | Path, timeout: float = 60.0) -> Path:
    """Download one freely downloadable test set into <data_root>/<dataset_id>/."""
    import requests

    if dataset_id not in FETCHABLE:
        raise KeyError(
            f"dataset {dataset_id!r} is not auto-fetchable (available: {sorted(FETCHABLE)}); "
            "see README for manual placement instructions"
        )
    dest = Path(data_root) / dataset_id
    dest.mkdir(parents=True, exist_ok=True)
    for url, name in FETCHABLE[dataset_id]:
        target = dest / name
        if target.exists():
            continue
        resp = requests.get(url, timeout=timeout)
        resp.raise_for_status()
        target.write_bytes(resp.content)
    return dest
