"""Build instruction datasets from ingested corpora: filter, sample, render, emit.

The build is deterministic for a given (config, seed): every random choice
draws from a purpose-labeled stream derived from the master seed, so pair
selection is shared across the three ablation modes and only the
instruction/input rendering changes between them. Emitted files are sorted
by a stable record key and hash-stamped into the manifest.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from . import corpora
from .core import (
    INSTRUCTION_SEPARATOR,
    PREFIX_TAGS,
    BuildMode,
    CompositeTask,
    EditPair,
    EditTask,
    InstructionInstance,
    Split,
    TaskLike,
    derive_rng,
    file_sha256,
    normalize_text,
    parse_task,
    read_jsonl,
    tokenize,
    write_jsonl,
)
from .heuristics import (
    EmptyContentError,
    FilterSpec,
    FrequencyTable,
    default_frequency_table,
    evaluate_profile,
    load_filter_presets,
    passes,
)
from .verbalizer import (
    TemplateBank,
    compose_composite_traced,
    default_bank,
    join_composite,
    sample_instruction,
)

# Table-style defaults for the shipped single-task and composite recipes.
DEFAULT_TASK_COUNTS: dict[str, int] = {
    "gec": 20_000,
    "coherence": 11_000,
    "clarity": 13_000,
    "paraphrase": 15_000,
    "formalize": 12_000,
    "neutralize": 11_000,
}

DEFAULT_COMPOSITE_COUNTS: dict[str, int] = {
    "gec+paraphrase": 1_000,
    "gec+simplification": 1_000,
    "gec+paraphrase+simplification": 1_000,
    "formalize+paraphrase": 5_000,
    "formalize+simplification": 2_000,
    "formalize+paraphrase+simplification": 4_000,
    "paraphrase+simplification": 5_000,
}


class InsufficientPoolError(RuntimeError):
    def __init__(self, task: str, requested: int, available: int):
        super().__init__(
            f"task {task!r}: requested {requested} pairs but only {available} pass the filters"
        )
        self.task = task
        self.requested = requested
        self.available = available


class AuditFailure(RuntimeError):
    def __init__(self, failures: list[str]):
        super().__init__("audit failed:\n" + "\n".join(failures))
        self.failures = failures


@dataclass(frozen=True)
class TaskBuildSpec:
    """One task (or composite) recipe: where pairs come from and how many to keep.

    Each source is (corpus_id, path, split): the split labels plain-layout
    corpus files; jsonl records carrying their own split override it.
    """

    task: TaskLike
    sources: tuple[tuple[str, str, Split], ...]
    count: int
    validation_count: int = 0
    filter_preset: str | None = None  # defaults to the task name when a preset exists

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError(f"task {self.task}: count must be positive")
        if self.validation_count < 0:
            raise ValueError(f"task {self.task}: validation_count must be >= 0")

    @property
    def name(self) -> str:
        return self.task.value


@dataclass(frozen=True)
class BuildConfig:
    tasks: tuple[TaskBuildSpec, ...]
    mode: BuildMode = BuildMode.INSTRUCTION
    seed: int = 0
    max_tokens: int = 256

    @classmethod
    def from_json(cls, path: str | Path, mode: str | None = None, seed: int | None = None) -> "BuildConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        tasks = tuple(
            TaskBuildSpec(
                task=parse_task(t["task"]),
                sources=tuple(
                    (s["corpus_id"], s["path"], Split(s.get("split", "train")))
                    for s in t["sources"]
                ),
                count=int(t["count"]),
                validation_count=int(t.get("validation_count", 0)),
                filter_preset=t.get("filter_preset"),
            )
            for t in raw["tasks"]
        )
        return cls(
            tasks=tasks,
            mode=BuildMode(mode if mode is not None else raw.get("mode", "instruction")),
            seed=int(seed if seed is not None else raw.get("seed", 0)),
            max_tokens=int(raw.get("max_tokens", 256)),
        )


@dataclass
class BuildManifest:
    seed: int
    mode: str
    max_tokens: int
    counts: dict[str, dict[str, int]]  # task -> split -> emitted records
    files: dict[str, dict[str, Any]]  # file name -> {sha256, records}
    out_dir: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "mode": self.mode,
                "max_tokens": self.max_tokens,
                "counts": self.counts,
                "files": self.files,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def load(cls, path: str | Path) -> "BuildManifest":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            seed=raw["seed"],
            mode=raw["mode"],
            max_tokens=raw["max_tokens"],
            counts=raw["counts"],
            files=raw["files"],
            out_dir=str(Path(path).parent),
        )


def _record_key(pair: EditPair) -> tuple[str, str, str]:
    return (normalize_text(pair.source), normalize_text(pair.target), pair.corpus_id)


def _within_length(pair: EditPair, max_tokens: int) -> bool:
    return len(tokenize(pair.source)) <= max_tokens and len(tokenize(pair.target)) <= max_tokens


def _filter_pool(
    pairs: Iterable[EditPair],
    spec_filter: FilterSpec | None,
    freq: FrequencyTable,
    max_tokens: int,
) -> list[EditPair]:
    kept = []
    for pair in pairs:
        if not _within_length(pair, max_tokens):
            continue
        if spec_filter is not None:
            try:
                profile = evaluate_profile(pair, freq)
            except EmptyContentError:
                continue
            if not passes(profile, spec_filter):
                continue
        kept.append(pair)
    kept.sort(key=_record_key)
    return kept


def _render_instruction(
    task_spec: TaskBuildSpec,
    mode: BuildMode,
    bank: TemplateBank,
    rng,
) -> tuple[str, dict[str, Any]]:
    """Instruction text (colon-free) plus the seed trace of the draws behind it."""
    task = task_spec.task
    if mode is BuildMode.PREFIX:
        if isinstance(task, CompositeTask):
            tag = " ".join(f"<{PREFIX_TAGS[t]}>" for t in task.tasks)
        else:
            tag = f"<{PREFIX_TAGS[task]}>"
        return tag, {"mode": "prefix"}
    if mode is BuildMode.RANDOMIZED:
        own = task.tasks if isinstance(task, CompositeTask) else (task,)
        donors = [t for t in bank.tasks() if t not in own]
        while True:
            donor = donors[rng.randrange(len(donors))]
            instruction = sample_instruction(bank, donor, rng)
            # Guard against cross-bank duplicate strings: the instruction must
            # not be a member of the record's own bank(s).
            if not any(bank.is_member(t, instruction) for t in own):
                return instruction, {"donor_task": donor.value}
    if isinstance(task, CompositeTask):
        rendered, order, templates = compose_composite_traced(bank, task, rng)
        trace = {
            "composite": True,
            "order": [t.value for t in order],
            "templates": list(templates),
        }
        return rendered[:-1], trace  # instruction field stores the colon-free text
    instruction = sample_instruction(bank, task, rng)
    return instruction, {"composite": False}


def _make_instance(
    pair: EditPair,
    instruction: str,
    mode: BuildMode,
    trace: dict[str, Any],
) -> InstructionInstance:
    source = normalize_text(pair.source)
    if mode is BuildMode.PREFIX:
        text_input = f"{instruction} {source}"
    else:
        text_input = f"{instruction}{INSTRUCTION_SEPARATOR}{source}"
    return InstructionInstance(
        instruction=instruction,
        input=text_input,
        target=normalize_text(pair.target),
        task=pair.task,
        mode=mode,
        corpus_id=pair.corpus_id,
        split=pair.split,
        references=pair.references,
        seed_trace=trace,
    )


def build(
    config: BuildConfig,
    out_dir: str | Path,
    bank: TemplateBank | None = None,
    freq: FrequencyTable | None = None,
    presets: dict[str, FilterSpec] | None = None,
) -> BuildManifest:
    """Run the full pipeline and emit train/validation record files plus a manifest."""
    bank = default_bank() if bank is None else bank
    freq = default_frequency_table() if freq is None else freq
    presets = load_filter_presets() if presets is None else presets
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    per_split_instances: dict[Split, list[InstructionInstance]] = {
        Split.TRAIN: [],
        Split.VALIDATION: [],
    }
    counts: dict[str, dict[str, int]] = {}

    for task_spec in config.tasks:
        task_name = task_spec.name
        preset_name = task_spec.filter_preset if task_spec.filter_preset is not None else task_name
        spec_filter = presets.get(preset_name)

        pairs = []
        for corpus_id, path, split in task_spec.sources:
            pairs.extend(corpora.ingest(corpus_id, path, task_spec.task, split))
        # Replace the task on every pair with the recipe's task: composite
        # recipes reuse single-task corpora.
        pairs = [
            EditPair(
                source=p.source,
                target=p.target,
                task=task_spec.task,
                corpus_id=p.corpus_id,
                split=p.split,
                references=p.references,
                annotations=p.annotations,
            )
            for p in pairs
        ]

        train_pool = _filter_pool(
            (p for p in pairs if p.split is Split.TRAIN), spec_filter, freq, config.max_tokens
        )
        if len(train_pool) < task_spec.count:
            raise InsufficientPoolError(task_name, task_spec.count, len(train_pool))
        rng_pairs = derive_rng(config.seed, "pairs", task_name, "train")
        chosen_train = rng_pairs.sample(train_pool, task_spec.count)
        chosen_train.sort(key=_record_key)

        chosen_val: list[EditPair] = []
        if task_spec.validation_count:
            train_sources = {normalize_text(p.source) for p in chosen_train}
            val_pool = [
                p
                for p in _filter_pool(
                    (p for p in pairs if p.split is Split.VALIDATION),
                    spec_filter,
                    freq,
                    config.max_tokens,
                )
                if normalize_text(p.source) not in train_sources
            ]
            if len(val_pool) < task_spec.validation_count:
                raise InsufficientPoolError(
                    f"{task_name} (validation)", task_spec.validation_count, len(val_pool)
                )
            rng_val = derive_rng(config.seed, "pairs", task_name, "validation")
            chosen_val = rng_val.sample(val_pool, task_spec.validation_count)
            chosen_val.sort(key=_record_key)

        counts[task_name] = {"train": len(chosen_train), "validation": len(chosen_val)}

        for split, chosen in ((Split.TRAIN, chosen_train), (Split.VALIDATION, chosen_val)):
            rng_instr = derive_rng(config.seed, "instructions", config.mode.value, task_name, split.value)
            for pair in chosen:
                instruction, trace = _render_instruction(task_spec, config.mode, bank, rng_instr)
                per_split_instances[split].append(_make_instance(pair, instruction, config.mode, trace))

    files: dict[str, dict[str, Any]] = {}
    for split, instances in per_split_instances.items():
        if not instances:
            continue
        instances.sort(key=lambda inst: (inst.task.value, inst.input, inst.target))
        path = out / f"{split.value}.jsonl"
        write_jsonl(path, (inst.to_record() for inst in instances))
        files[path.name] = {"sha256": file_sha256(path), "records": len(instances)}

    manifest = BuildManifest(
        seed=config.seed,
        mode=config.mode.value,
        max_tokens=config.max_tokens,
        counts=counts,
        files=files,
        out_dir=str(out),
    )
    (out / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    return manifest


@dataclass
class AuditReport:
    passed: bool
    checked_records: int
    failures: list[str] = field(default_factory=list)
    own_task_instruction_count: int = 0  # randomized mode only

    def raise_on_failure(self) -> None:
        if not self.passed:
            raise AuditFailure(self.failures)


def _instruction_ok(inst: InstructionInstance, bank: TemplateBank) -> str | None:
    """None when the record's instruction is consistent with its mode; else a reason."""
    task = inst.task
    if inst.mode is BuildMode.PREFIX:
        tasks = task.tasks if isinstance(task, CompositeTask) else (task,)
        expected = " ".join(f"<{PREFIX_TAGS[t]}>" for t in tasks)
        return None if inst.instruction == expected else f"expected tag {expected!r}"
    if inst.mode is BuildMode.RANDOMIZED:
        own = task.tasks if isinstance(task, CompositeTask) else (task,)
        if any(bank.is_member(t, inst.instruction) for t in own):
            return "randomized-mode instruction belongs to its own task bank"
        if not any(bank.is_member(t, inst.instruction) for t in bank.tasks()):
            return "randomized-mode instruction not found in any bank"
        return None
    if isinstance(task, CompositeTask):
        trace = inst.seed_trace or {}
        order = trace.get("order")
        templates = trace.get("templates")
        if not order or not templates or len(order) != len(templates):
            return "composite record lacks a usable seed trace"
        if sorted(order) != sorted(t.value for t in task.tasks):
            return "composite seed-trace order is not a permutation of the task list"
        for task_name, template in zip(order, templates):
            if not bank.is_member(EditTask(task_name), template):
                return f"composite component not in bank for task {task_name!r}"
        if join_composite(list(templates)) != inst.instruction + ":":
            return "composite instruction does not reconstruct from its seed trace"
        return None
    if not bank.is_member(task, inst.instruction):
        return f"instruction not in bank for task {task.value!r}"
    return None


def audit(manifest: BuildManifest | str | Path, bank: TemplateBank | None = None) -> AuditReport:
    """Verify emitted records against the manifest and the template bank."""
    if not isinstance(manifest, BuildManifest):
        manifest = BuildManifest.load(manifest)
    bank = default_bank() if bank is None else bank
    failures: list[str] = []
    own_task_count = 0
    checked = 0
    for name, meta in manifest.files.items():
        path = Path(manifest.out_dir) / name
        if not path.exists():
            failures.append(f"{name}: file missing")
            continue
        if file_sha256(path) != meta["sha256"]:
            failures.append(f"{name}: content hash mismatch")
        records = 0
        for i, rec in enumerate(read_jsonl(path), start=1):
            records += 1
            checked += 1
            inst = InstructionInstance.from_record(rec)
            if inst.mode.value != manifest.mode:
                failures.append(f"{name}:{i}: mode {inst.mode.value!r} != manifest {manifest.mode!r}")
            reason = _instruction_ok(inst, bank)
            if reason is not None:
                failures.append(f"{name}:{i}: {reason}")
                if reason.startswith("randomized-mode instruction belongs"):
                    own_task_count += 1
        if records != meta["records"]:
            failures.append(f"{name}: {records} records, manifest says {meta['records']}")
    per_task: dict[str, int] = {}
    for name in manifest.files:
        for rec in read_jsonl(Path(manifest.out_dir) / name):
            per_task[rec["task"]] = per_task.get(rec["task"], 0) + 1
    for task_name, split_counts in manifest.counts.items():
        expected = sum(split_counts.values())
        if per_task.get(task_name, 0) != expected:
            failures.append(
                f"task {task_name}: {per_task.get(task_name, 0)} emitted records, manifest says {expected}"
            )
    return AuditReport(
        passed=not failures,
        checked_records=checked,
        failures=failures,
        own_task_instruction_count=own_task_count,
    )
