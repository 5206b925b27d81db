"""End-to-end evaluation: run a system over a benchmark suite and score it.

A system is one of: the copy baseline, a live endpoint, a file of
precomputed outputs, or a chaining pipeline that decomposes composite
instructions into sequential single-task calls. Hypotheses are persisted
next to the report so human-evaluation studies can reuse them. Failures are
surfaced per (dataset, metric) row; a partial report is still a report.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from . import metrics as metrics_mod
from .core import (
    INSTRUCTION_SEPARATOR,
    BuildMode,
    CompositeTask,
    EditTask,
    InstructionInstance,
    ScoreReport,
    ScoreRow,
    Split,
    TaskLike,
    derive_rng,
    parse_task,
)
from .datasets import EvalData, load_eval_dataset
from .gateway import EndpointConfig, RunLog, generate, score_formality, semantic_similarity
from .metrics import MetricInput
from .verbalizer import TemplateBank, compose_composite_traced, default_bank, sample_instruction


class SuiteMismatchError(ValueError):
    pass


class NonCompositeInputError(ValueError):
    pass


class ChainStepError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"chain step {step} failed: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class DatasetSpec:
    dataset_id: str
    task: TaskLike | None
    metrics: tuple[str, ...]
    loader: str | None = None  # defaults to dataset_id
    path: str | None = None  # defaults to <data_root>/<dataset_id>

    def __post_init__(self):
        if not self.metrics:
            raise ValueError(f"dataset {self.dataset_id}: needs at least one metric")
        unknown = [m for m in self.metrics if m not in METRIC_NAMES]
        if unknown:
            raise ValueError(f"dataset {self.dataset_id}: unknown metrics {unknown}")


@dataclass(frozen=True)
class BenchmarkSuite:
    datasets: tuple[DatasetSpec, ...]

    def keys(self) -> tuple[tuple[str, str], ...]:
        return tuple((d.dataset_id, m) for d in self.datasets for m in d.metrics)

    @classmethod
    def default(cls) -> "BenchmarkSuite":
        t = EditTask
        return cls(
            datasets=(
                DatasetSpec("iterater", None, ("sari",)),
                DatasetSpec("jfleg", t.GEC, ("sari", "gleu")),
                DatasetSpec("asset", t.SIMPLIFICATION, ("sari",)),
                DatasetSpec("turkcorpus", t.SIMPLIFICATION, ("sari",)),
                DatasetSpec("discofuse", t.COHERENCE, ("sari",)),
                DatasetSpec("gyafc", t.FORMALIZE, ("sari", "formality")),
                DatasetSpec("wnc", t.NEUTRALIZE, ("sari", "em")),
                DatasetSpec("mrpc", t.PARAPHRASE, ("self_bleu", "semantic_similarity")),
                DatasetSpec("sts", t.PARAPHRASE, ("self_bleu", "semantic_similarity")),
                DatasetSpec("qqp", t.PARAPHRASE, ("self_bleu", "semantic_similarity")),
                DatasetSpec("compression", t.COMPRESSION, ("sari", "cr")),
                DatasetSpec("politeness", t.POLITENESS, ("self_bleu_source", "transfer_accuracy")),
            )
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "BenchmarkSuite":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            datasets=tuple(
                DatasetSpec(
                    dataset_id=d["dataset_id"],
                    task=parse_task(d["task"]) if d.get("task") else None,
                    metrics=tuple(d["metrics"]),
                    loader=d.get("loader"),
                    path=d.get("path"),
                )
                for d in raw["datasets"]
            )
        )


@dataclass(frozen=True)
class SystemUnderTest:
    """What produces hypotheses: copy | endpoint | outputs-file | chain."""

    kind: str
    endpoint: EndpointConfig | None = None
    outputs_dir: str | None = None
    system_id: str | None = None

    def __post_init__(self):
        if self.kind not in ("copy", "endpoint", "outputs-file", "chain"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.kind in ("endpoint", "chain") and self.endpoint is None:
            raise ValueError(f"{self.kind} system needs an endpoint config")
        if self.kind == "outputs-file" and self.outputs_dir is None:
            raise ValueError("outputs-file system needs an outputs directory")

    @property
    def name(self) -> str:
        return self.system_id or self.kind


# ---------------------------------------------------------------------------
# Instruction rendering and chaining


def render_eval_instance(
    task: TaskLike,
    source: str,
    bank: TemplateBank,
    rng,
    dataset_id: str = "eval",
) -> InstructionInstance:
    """Wrap a test source with a randomly drawn instruction for its task."""
    if isinstance(task, CompositeTask):
        text, order, templates = compose_composite_traced(bank, task, rng)
        instruction = text[:-1]
        trace: dict[str, Any] = {
            "composite": True,
            "order": [t.value for t in order],
            "templates": list(templates),
        }
    else:
        instruction = sample_instruction(bank, task, rng)
        trace = {"composite": False}
    return InstructionInstance(
        instruction=instruction,
        input=f"{instruction}{INSTRUCTION_SEPARATOR}{source}",
        target="",
        task=task,
        mode=BuildMode.INSTRUCTION,
        corpus_id=dataset_id,
        split=Split.TEST,
        seed_trace=trace,
    )


CHAIN_PLACEHOLDER = "{{prev}}"


def chain_decompose(
    instance: InstructionInstance,
    bank: TemplateBank | None = None,
    rng=None,
) -> list[InstructionInstance]:
    """Split a composite-task instance into single-task steps, in stored order.

    Decomposition uses the composite metadata, never the instruction string.
    Step i+1 carries a source placeholder that run_chain binds to step i's
    output.
    """
    if not isinstance(instance.task, CompositeTask):
        raise NonCompositeInputError("chain_decompose needs a composite-task instance")
    bank = default_bank() if bank is None else bank
    rng = derive_rng(0, "chain") if rng is None else rng
    steps = []
    for i, task in enumerate(instance.task.tasks):
        instruction = sample_instruction(bank, task, rng)
        source = instance.source if i == 0 else CHAIN_PLACEHOLDER
        steps.append(
            InstructionInstance(
                instruction=instruction,
                input=f"{instruction}{INSTRUCTION_SEPARATOR}{source}",
                target=instance.target,
                task=task,
                mode=BuildMode.INSTRUCTION,
                corpus_id=instance.corpus_id,
                split=instance.split,
                seed_trace={"chain_step": i},
            )
        )
    return steps


@dataclass(frozen=True)
class ChainRun:
    final_output: str
    step_outputs: tuple[str, ...]


def run_chain(
    steps: Sequence[InstructionInstance],
    config: EndpointConfig,
    run_log: RunLog | None = None,
) -> ChainRun:
    """Sequential application: each step consumes the previous step's output."""
    outputs: list[str] = []
    previous: str | None = None
    for i, step in enumerate(steps):
        text_input = step.input
        if i > 0:
            text_input = text_input.replace(CHAIN_PLACEHOLDER, previous or "")
        try:
            if config.style == "edit":
                out = generate(config, text_input.split(INSTRUCTION_SEPARATOR, 1)[1],
                               edit_instruction=step.instruction, run_log=run_log)
            else:
                out = generate(config, text_input, run_log=run_log)
        except Exception as exc:
            raise ChainStepError(i, exc) from exc
        outputs.append(out)
        previous = out
    if not outputs:
        raise NonCompositeInputError("empty chain")
    return ChainRun(final_output=outputs[-1], step_outputs=tuple(outputs))


# ---------------------------------------------------------------------------
# Metric dispatch

METRIC_NAMES = (
    "sari",
    "gleu",
    "em",
    "self_bleu",
    "self_bleu_source",
    "cr",
    "formality",
    "transfer_accuracy",
    "semantic_similarity",
)

_CLASSIFIER_METRICS = ("formality", "transfer_accuracy")


def compute_metric(
    name: str,
    items: Sequence[MetricInput],
    scorers: dict[str, EndpointConfig] | None = None,
) -> float:
    scorers = scorers or {}
    if name == "sari":
        return metrics_mod.corpus_sari(items)
    if name == "gleu":
        return metrics_mod.corpus_gleu(items)
    if name == "em":
        return metrics_mod.exact_match(items)
    if name == "self_bleu":
        return metrics_mod.corpus_self_bleu(items, against="references")
    if name == "self_bleu_source":
        return metrics_mod.corpus_self_bleu(items, against="source")
    if name == "cr":
        return metrics_mod.compression_ratio(items)
    if name in _CLASSIFIER_METRICS:
        config = scorers.get(name)
        if config is None:
            raise RuntimeError(f"metric {name!r} needs a scorer endpoint (none configured)")
        return score_formality([it.hypothesis for it in items], config)
    if name == "semantic_similarity":
        config = scorers.get(name)
        if config is None:
            raise RuntimeError("metric 'semantic_similarity' needs a scorer endpoint (none configured)")
        return semantic_similarity([(it.source, it.hypothesis) for it in items], config)
    raise KeyError(f"unknown metric {name!r}")


# ---------------------------------------------------------------------------
# Running a system


def _produce_hypotheses(
    system: SystemUnderTest,
    spec: DatasetSpec,
    data: EvalData,
    seed: int,
    bank: TemplateBank,
    out_dir: Path,
) -> list[str]:
    if system.kind == "copy":
        # The copy baseline echoes the source, without any instruction.
        return [item.source for item in data.items]
    if system.kind == "outputs-file":
        path = Path(system.outputs_dir) / f"{spec.dataset_id}.txt"
        if not path.exists():
            raise FileNotFoundError(f"outputs file not found: {path}")
        lines = path.read_text(encoding="utf-8").rstrip("\n").split("\n")
        if len(lines) != len(data.items):
            raise ValueError(
                f"{path}: {len(lines)} outputs for {len(data.items)} test items"
            )
        return lines
    # Live endpoint (single instruction or chaining).
    rng = derive_rng(seed, "eval-instructions", spec.dataset_id)
    run_log = RunLog(out_dir / f"runlog-{spec.dataset_id}.jsonl")
    hyps = []
    for i, item in enumerate(data.items):
        task = data.tasks[i] if data.tasks is not None else spec.task
        if task is None:
            raise RuntimeError(
                f"dataset {spec.dataset_id}: no task available to render instructions"
            )
        instance = render_eval_instance(task, item.source, bank, rng, spec.dataset_id)
        if system.kind == "chain":
            steps = chain_decompose(instance, bank, rng)
            hyps.append(run_chain(steps, system.endpoint, run_log).final_output)
        elif system.endpoint.style == "edit":
            hyps.append(generate(system.endpoint, item.source,
                                 edit_instruction=instance.instruction, run_log=run_log))
        else:
            hyps.append(generate(system.endpoint, instance.input, run_log=run_log))
    return hyps


def _persist_hypotheses(out_dir: Path, dataset_id: str, hyps: Sequence[str]) -> None:
    hyp_dir = out_dir / "hypotheses"
    hyp_dir.mkdir(parents=True, exist_ok=True)
    text = "\n".join(h.replace("\n", " ") for h in hyps)
    (hyp_dir / f"{dataset_id}.txt").write_text(text + "\n", encoding="utf-8")


def run(
    suite: BenchmarkSuite,
    system: SystemUnderTest,
    data_root: str | Path,
    out_dir: str | Path,
    seed: int = 0,
    bank: TemplateBank | None = None,
    scorers: dict[str, EndpointConfig] | None = None,
) -> ScoreReport:
    """Evaluate one system over the suite; one ScoreRow per (dataset, metric)."""
    bank = default_bank() if bank is None else bank
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[ScoreRow] = []
    for spec in suite.datasets:
        loader = spec.loader or spec.dataset_id
        path = Path(spec.path) if spec.path else Path(data_root) / spec.dataset_id
        try:
            data = load_eval_dataset(loader, path)
            hyps = _produce_hypotheses(system, spec, data, seed, bank, out)
            scored = [dataclasses.replace(item, hypothesis=h) for item, h in zip(data.items, hyps)]
            _persist_hypotheses(out, spec.dataset_id, hyps)
        except Exception as exc:
            for metric in spec.metrics:
                rows.append(ScoreRow(spec.dataset_id, metric, None, error=str(exc)))
            continue
        for metric in spec.metrics:
            try:
                value = compute_metric(metric, scored, scorers)
                rows.append(ScoreRow(spec.dataset_id, metric, value))
            except Exception as exc:
                rows.append(ScoreRow(spec.dataset_id, metric, None, error=str(exc)))
    metadata = {
        "seed": seed,
        "system_kind": system.kind,
        "decoding": "greedy" if system.endpoint is None or system.endpoint.temperature == 0 else
        f"temperature={system.endpoint.temperature}",
    }
    report = ScoreReport(system_id=system.name, rows=tuple(rows), metadata=metadata)
    (out / f"report-{system.name}.json").write_text(
        json.dumps(report.to_record(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report
