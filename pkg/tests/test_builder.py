from __future__ import annotations

import json
from pathlib import Path

import pytest

from editkit.builder import (
    AuditFailure,
    BuildConfig,
    BuildManifest,
    InsufficientPoolError,
    TaskBuildSpec,
    audit,
    build,
)
from editkit.core import (
    BuildMode,
    CompositeTask,
    EditTask,
    InstructionInstance,
    Split,
    parse_task,
    read_jsonl,
)


def _config(corpus: Path, mode=BuildMode.INSTRUCTION, seed=7, **overrides) -> BuildConfig:
    tasks = overrides.pop("tasks", None) or (
        TaskBuildSpec(task=EditTask.GEC, sources=((("jsonl"), str(corpus), Split.TRAIN),),
                      count=120, validation_count=20),
        TaskBuildSpec(task=EditTask.CLARITY, sources=(("jsonl", str(corpus), Split.TRAIN),),
                      count=60),
        TaskBuildSpec(task=parse_task("gec+paraphrase+simplification"),
                      sources=(("jsonl", str(corpus), Split.TRAIN),), count=10),
    )
    return BuildConfig(tasks=tasks, mode=mode, seed=seed, **overrides)


def _records(out: Path, split: str) -> list[dict]:
    return list(read_jsonl(out / f"{split}.jsonl"))


class TestBuildCounts:
    def test_exact_counts_and_manifest(self, synthetic_corpus, tmp_path):
        manifest = build(_config(synthetic_corpus), tmp_path / "out")
        assert manifest.counts["gec"] == {"train": 120, "validation": 20}
        assert manifest.counts["clarity"] == {"train": 60, "validation": 0}
        assert manifest.counts["gec+paraphrase+simplification"] == {"train": 10, "validation": 0}
        train = _records(tmp_path / "out", "train")
        assert len(train) == manifest.files["train.jsonl"]["records"] == 190
        assert len(_records(tmp_path / "out", "validation")) == 20

    def test_insufficient_pool_names_task(self, synthetic_corpus, tmp_path):
        config = _config(
            synthetic_corpus,
            tasks=(TaskBuildSpec(task=EditTask.GEC,
                                 sources=(("jsonl", str(synthetic_corpus), Split.TRAIN),),
                                 count=100_000),),
        )
        with pytest.raises(InsufficientPoolError) as err:
            build(config, tmp_path / "out")
        assert err.value.task == "gec"

    def test_max_tokens_cap_filters(self, tmp_path):
        corpus = tmp_path / "long.jsonl"
        rows = [{"source": " ".join(["walk"] * 30), "target": " ".join(["walk"] * 29)},
                {"source": "short one here", "target": "short two here"}]
        corpus.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        config = BuildConfig(
            tasks=(TaskBuildSpec(task=EditTask.COHERENCE,
                                 sources=(("jsonl", str(corpus), Split.TRAIN),), count=1),),
            max_tokens=10, seed=1,
        )
        manifest = build(config, tmp_path / "out")
        (rec,) = _records(tmp_path / "out", "train")
        assert rec["input"].endswith("short one here")
        assert manifest.max_tokens == 10


class TestDeterminism:
    def test_same_seed_byte_identical(self, synthetic_corpus, tmp_path):
        build(_config(synthetic_corpus, seed=42), tmp_path / "a")
        build(_config(synthetic_corpus, seed=42), tmp_path / "b")
        for name in ("train.jsonl", "validation.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_different_seed_differs(self, synthetic_corpus, tmp_path):
        build(_config(synthetic_corpus, seed=1), tmp_path / "a")
        build(_config(synthetic_corpus, seed=2), tmp_path / "b")
        assert (tmp_path / "a" / "train.jsonl").read_bytes() != (tmp_path / "b" / "train.jsonl").read_bytes()

    def test_mode_isolation_pair_selection_shared(self, synthetic_corpus, tmp_path):
        build(_config(synthetic_corpus, mode=BuildMode.INSTRUCTION, seed=5), tmp_path / "instr")
        build(_config(synthetic_corpus, mode=BuildMode.PREFIX, seed=5), tmp_path / "prefix")
        build(_config(synthetic_corpus, mode=BuildMode.RANDOMIZED, seed=5), tmp_path / "rand")
        keys = []
        for sub in ("instr", "prefix", "rand"):
            recs = _records(tmp_path / sub, "train")
            pairs = set()
            for rec in recs:
                inst = InstructionInstance.from_record(rec)
                pairs.add((inst.source, inst.target, rec["task"]))
            keys.append(pairs)
        assert keys[0] == keys[1] == keys[2]


class TestModes:
    def test_instruction_mode_inputs(self, synthetic_corpus, tmp_path):
        build(_config(synthetic_corpus), tmp_path / "out")
        for rec in _records(tmp_path / "out", "train"):
            assert rec["input"].startswith(rec["instruction"] + ": ")
            assert rec["mode"] == "instruction"

    def test_prefix_mode_tags(self, synthetic_corpus, tmp_path):
        build(_config(synthetic_corpus, mode=BuildMode.PREFIX), tmp_path / "out")
        tags = {"gec": "<gec>", "clarity": "<clarify>",
                "gec+paraphrase+simplification": "<gec> <paraphrase> <simplify>"}
        for rec in _records(tmp_path / "out", "train"):
            assert rec["instruction"] == tags[rec["task"]]
            assert rec["input"].startswith(rec["instruction"] + " ")

    def test_randomized_mode_uses_other_banks_only(self, synthetic_corpus, tmp_path, bank):
        build(_config(synthetic_corpus, mode=BuildMode.RANDOMIZED), tmp_path / "out")
        for rec in _records(tmp_path / "out", "train"):
            task = parse_task(rec["task"])
            own = task.tasks if isinstance(task, CompositeTask) else (task,)
            assert not any(bank.is_member(t, rec["instruction"]) for t in own)
            assert any(bank.is_member(t, rec["instruction"]) for t in bank.tasks())

    def test_composite_instruction_mode_grammar(self, synthetic_corpus, tmp_path, bank):
        build(_config(synthetic_corpus), tmp_path / "out")
        composites = [r for r in _records(tmp_path / "out", "train")
                      if r["task"] == "gec+paraphrase+simplification"]
        assert len(composites) == 10
        for rec in composites:
            assert ", and " in rec["instruction"]
            trace = rec["seed_trace"]
            assert sorted(trace["order"]) == ["gec", "paraphrase", "simplification"]
            for task_name, template in zip(trace["order"], trace["templates"]):
                assert bank.is_member(EditTask(task_name), template)


class TestSplitHygiene:
    def test_no_source_in_two_splits(self, synthetic_corpus, tmp_path):
        build(_config(synthetic_corpus), tmp_path / "out")
        train_sources = {InstructionInstance.from_record(r).source
                         for r in _records(tmp_path / "out", "train")}
        val_sources = {InstructionInstance.from_record(r).source
                       for r in _records(tmp_path / "out", "validation")}
        assert not (train_sources & val_sources)


class TestAudit:
    def test_clean_build_passes(self, synthetic_corpus, tmp_path):
        manifest = build(_config(synthetic_corpus), tmp_path / "out")
        report = audit(manifest)
        assert report.passed and report.checked_records == 210

    def test_audit_via_manifest_file(self, synthetic_corpus, tmp_path):
        build(_config(synthetic_corpus), tmp_path / "out")
        report = audit(tmp_path / "out" / "manifest.json")
        assert report.passed

    def test_randomized_own_task_count_zero(self, synthetic_corpus, tmp_path):
        manifest = build(_config(synthetic_corpus, mode=BuildMode.RANDOMIZED), tmp_path / "out")
        report = audit(manifest)
        assert report.passed
        assert report.own_task_instruction_count == 0

    def test_hand_edited_record_caught(self, synthetic_corpus, tmp_path):
        manifest = build(_config(synthetic_corpus), tmp_path / "out")
        path = tmp_path / "out" / "train.jsonl"
        lines = path.read_text(encoding="utf-8").rstrip("\n").split("\n")
        rec = json.loads(lines[0])
        source = InstructionInstance.from_record(rec).source
        rec["instruction"] = "Make this more polite"  # foreign-task instruction
        rec["input"] = "Make this more polite: " + source
        # keep the line count; rewrite first record in place
        lines[0] = json.dumps(rec, ensure_ascii=False, sort_keys=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        report = audit(manifest)
        assert not report.passed
        assert any("train.jsonl:1" in f for f in report.failures)
        with pytest.raises(AuditFailure):
            report.raise_on_failure()

    def test_tampered_file_hash_mismatch(self, synthetic_corpus, tmp_path):
        manifest = build(_config(synthetic_corpus), tmp_path / "out")
        path = tmp_path / "out" / "validation.jsonl"
        path.write_text(path.read_text(encoding="utf-8") + "\n", encoding="utf-8")
        report = audit(manifest)
        assert any("hash mismatch" in f for f in report.failures)


class TestBuildConfigIO:
    def test_from_json_roundtrip(self, synthetic_corpus, tmp_path):
        raw = {
            "mode": "instruction",
            "seed": 3,
            "max_tokens": 128,
            "tasks": [
                {
                    "task": "gec",
                    "count": 15,
                    "validation_count": 2,
                    "sources": [{"corpus_id": "jsonl", "path": str(synthetic_corpus)}],
                },
                {
                    "task": "gec+simplification",
                    "count": 5,
                    "sources": [{"corpus_id": "jsonl", "path": str(synthetic_corpus)}],
                },
            ],
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        config = BuildConfig.from_json(path, mode="prefix", seed=11)
        assert config.mode is BuildMode.PREFIX and config.seed == 11
        assert config.max_tokens == 128
        manifest = build(config, tmp_path / "out")
        assert manifest.counts["gec"]["train"] == 15
        assert BuildManifest.load(tmp_path / "out" / "manifest.json").seed == 11
