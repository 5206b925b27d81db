from __future__ import annotations

import json

import pytest

from editkit.core import (
    CompositeTask,
    EditTask,
    ScoreReport,
    ScoreRow,
    derive_rng,
    parse_task,
)
from editkit.gateway import EndpointConfig
from editkit.harness import (
    BenchmarkSuite,
    ChainStepError,
    DatasetSpec,
    NonCompositeInputError,
    SystemUnderTest,
    chain_decompose,
    render_eval_instance,
    run,
    run_chain,
)
from editkit.reporting import (
    AggregationRules,
    SuiteMismatchError,
    overall_score,
    parse_report_csv,
    render_csv,
    render_text,
    write_report,
)
from mockserver import MockEndpoint, completion_identity


def _mini_dataset(tmp_path, n=4, dataset_id="mini", task="gec"):
    root = tmp_path / dataset_id
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n):
        rows.append({"source": f"he go home number {i}", "references": [f"he goes home number {i}"]})
    (root / "test.jsonl").write_text(
        "\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8"
    )
    return DatasetSpec(dataset_id, parse_task(task), ("sari", "em"), loader="jsonl_eval")


class TestCopySystem:
    def test_hypotheses_equal_sources(self, tmp_path):
        suite = BenchmarkSuite(datasets=(_mini_dataset(tmp_path),))
        report = run(suite, SystemUnderTest(kind="copy"), data_root=tmp_path, out_dir=tmp_path / "out")
        persisted = (tmp_path / "out" / "hypotheses" / "mini.txt").read_text().rstrip("\n").split("\n")
        assert persisted == [f"he go home number {i}" for i in range(4)]
        assert report.value("mini", "em") == 0.0

    def test_copy_consumes_no_rng(self, tmp_path):
        suite = BenchmarkSuite(datasets=(_mini_dataset(tmp_path),))
        r1 = run(suite, SystemUnderTest(kind="copy"), data_root=tmp_path, out_dir=tmp_path / "o1", seed=1)
        r2 = run(suite, SystemUnderTest(kind="copy"), data_root=tmp_path, out_dir=tmp_path / "o2", seed=2)
        assert [row.value for row in r1.rows] == [row.value for row in r2.rows]


class TestOutputsFileSystem:
    def test_outputs_equal_targets_scores_em_100(self, tmp_path):
        spec = _mini_dataset(tmp_path)
        outputs = tmp_path / "sysout"
        outputs.mkdir()
        (outputs / "mini.txt").write_text(
            "\n".join(f"he goes home number {i}" for i in range(4)) + "\n", encoding="utf-8"
        )
        suite = BenchmarkSuite(datasets=(spec,))
        system = SystemUnderTest(kind="outputs-file", outputs_dir=str(outputs), system_id="oracle")
        report = run(suite, system, data_root=tmp_path, out_dir=tmp_path / "out")
        assert report.value("mini", "em") == 100.0
        assert report.system_id == "oracle"

    def test_count_mismatch_marks_rows_failed(self, tmp_path):
        spec = _mini_dataset(tmp_path)
        outputs = tmp_path / "sysout"
        outputs.mkdir()
        (outputs / "mini.txt").write_text("only one line\n", encoding="utf-8")
        suite = BenchmarkSuite(datasets=(spec,))
        system = SystemUnderTest(kind="outputs-file", outputs_dir=str(outputs))
        report = run(suite, system, data_root=tmp_path, out_dir=tmp_path / "out")
        assert all(row.value is None and row.error for row in report.rows)


class TestEndpointSystem:
    def test_instruction_rendered_membership(self, tmp_path, bank):
        spec = _mini_dataset(tmp_path)
        suite = BenchmarkSuite(datasets=(spec,))
        prompts = []

        def record_and_echo(body, _i):
            prompts.append(body["prompt"])
            return 200, {"choices": [{"text": body["prompt"].split(": ", 1)[1]}]}

        with MockEndpoint(record_and_echo) as mock:
            system = SystemUnderTest(kind="endpoint", endpoint=EndpointConfig(base_url=mock.url))
            report = run(suite, system, data_root=tmp_path, out_dir=tmp_path / "out", seed=3)
        assert report.value("mini", "em") == 0.0  # identity endpoint, no edit
        for prompt in prompts:
            instruction = prompt.split(": ", 1)[0]
            assert bank.is_member(EditTask.GEC, instruction)

    def test_missing_dataset_yields_partial_report(self, tmp_path):
        ok = _mini_dataset(tmp_path)
        missing = DatasetSpec("ghost", EditTask.GEC, ("sari",), loader="jsonl_eval")
        suite = BenchmarkSuite(datasets=(ok, missing))
        report = run(suite, SystemUnderTest(kind="copy"), data_root=tmp_path, out_dir=tmp_path / "out")
        assert report.value("mini", "sari") is not None
        ghost_row = [r for r in report.rows if r.dataset_id == "ghost"][0]
        assert ghost_row.value is None and "ghost" in ghost_row.error


def _composite_instance(source="They follow the way the Sun goes.", n_tasks=2):
    from editkit.verbalizer import default_bank

    tasks = (EditTask.GEC, EditTask.SIMPLIFICATION, EditTask.PARAPHRASE)[:n_tasks]
    return render_eval_instance(CompositeTask(tasks), source, default_bank(), derive_rng(1, "t"))


class TestChaining:
    def test_decompose_preserves_order_and_arity(self, bank):
        inst = _composite_instance(n_tasks=3)
        steps = chain_decompose(inst, bank, derive_rng(2, "chain"))
        assert len(steps) == 3
        assert [s.task for s in steps] == [EditTask.GEC, EditTask.SIMPLIFICATION, EditTask.PARAPHRASE]
        assert steps[0].source == inst.source
        for later in steps[1:]:
            assert later.source == "{{prev}}"

    def test_non_composite_rejected(self, bank):
        single = render_eval_instance(EditTask.GEC, "he go home", bank, derive_rng(0, "x"))
        with pytest.raises(NonCompositeInputError):
            chain_decompose(single, bank, derive_rng(0, "y"))

    def test_identity_chain_returns_source(self, bank):
        for n_tasks in (2, 3):
            inst = _composite_instance(n_tasks=n_tasks)
            steps = chain_decompose(inst, bank, derive_rng(3, "chain"))
            with MockEndpoint(completion_identity) as mock:
                result = run_chain(steps, EndpointConfig(base_url=mock.url))
            assert result.final_output == inst.source
            assert len(result.step_outputs) == n_tasks

    def test_step_tagging_proves_order_and_dataflow(self, bank):
        # each step appends a marker derived from its instruction; nesting in
        # the final output proves execution order and that step i+1 consumed
        # step i's output
        def tagging(body, _i):
            instruction, source = body["prompt"].split(": ", 1)
            return 200, {"choices": [{"text": f"{source} #{instruction.split()[0].lower()}"}]}

        inst = _composite_instance(source="the input text", n_tasks=3)
        steps = chain_decompose(inst, bank, derive_rng(4, "chain"))
        with MockEndpoint(tagging) as mock:
            result = run_chain(steps, EndpointConfig(base_url=mock.url))
        markers = [s.instruction.split()[0].lower() for s in steps]
        assert result.final_output == "the input text #" + " #".join(markers)
        assert result.step_outputs[0] == f"the input text #{markers[0]}"

    def test_appending_mock_three_steps(self, bank):
        def bang(body, _i):
            return 200, {"choices": [{"text": body["prompt"].split(": ", 1)[1] + "!"}]}

        inst = _composite_instance(source="src", n_tasks=3)
        steps = chain_decompose(inst, bank, derive_rng(5, "chain"))
        with MockEndpoint(bang) as mock:
            result = run_chain(steps, EndpointConfig(base_url=mock.url))
        assert result.final_output == "src!!!"

    def test_step_error_carries_index(self, bank):
        def fail_second(body, index):
            if index >= 1:
                return 500, {}
            return 200, {"choices": [{"text": "fine"}]}

        inst = _composite_instance(n_tasks=2)
        steps = chain_decompose(inst, bank, derive_rng(6, "chain"))
        with MockEndpoint(fail_second) as mock:
            config = EndpointConfig(base_url=mock.url, max_attempts=1, backoff_seconds=0.01)
            with pytest.raises(ChainStepError) as err:
                run_chain(steps, config)
            assert err.value.step == 1


def _report(system_id, values):
    rows = tuple(ScoreRow(d, m, v) for (d, m), v in values.items())
    return ScoreReport(system_id=system_id, rows=rows)


class TestReporting:
    KEYS = {("asset", "sari"): 20.7, ("jfleg", "sari"): 26.7, ("jfleg", "gleu"): 40.5,
            ("mrpc", "self_bleu"): 47.4}

    def test_csv_roundtrip(self):
        reports = [_report("copy", self.KEYS), _report("model", {k: v + 1 for k, v in self.KEYS.items()})]
        parsed = parse_report_csv(render_csv(reports))
        assert [p.system_id for p in parsed] == ["copy", "model"]
        for original, recovered in zip(reports, parsed):
            for row in original.rows:
                assert recovered.value(row.dataset_id, row.metric_name) == row.value

    def test_text_table_shape(self):
        text = render_text([_report("copy", self.KEYS)])
        lines = text.strip().split("\n")
        assert lines[0].startswith("system")
        assert "overall" in lines[0]
        assert lines[2].startswith("copy")

    def test_suite_mismatch(self):
        a = _report("copy", self.KEYS)
        b = _report("model", {("asset", "sari"): 30.0})
        with pytest.raises(SuiteMismatchError):
            render_csv([a, b])

    def test_overall_rules(self):
        # mrpc excluded; jfleg averages its two metrics
        report = _report("copy", self.KEYS)
        expected = (20.7 + (26.7 + 40.5) / 2) / 2
        assert overall_score(report) == pytest.approx(expected)

    def test_overall_inverts_self_bleu(self):
        rules = AggregationRules(excluded_datasets=())
        report = _report("copy", {("mrpc", "self_bleu"): 40.0, ("asset", "sari"): 20.0})
        assert overall_score(report, rules) == pytest.approx(((100 - 40.0) + 20.0) / 2)

    def test_failed_rows_leave_overall_unset(self):
        report = ScoreReport(system_id="x", rows=(ScoreRow("asset", "sari", None, "boom"),))
        assert overall_score(report) is None

    def test_write_report_files_and_figures(self, tmp_path):
        reports = [_report("copy", self.KEYS), _report("model", {k: v + 2 for k, v in self.KEYS.items()})]
        written = write_report(reports, tmp_path / "report")
        assert written["csv"].exists() and written["txt"].exists()
        figures = list((tmp_path / "report" / "figures").glob("*.png"))
        assert len(figures) >= 2
        assert all(f.stat().st_size > 1000 for f in figures)


class TestSuiteConfig:
    def test_default_suite_covers_benchmarks(self):
        suite = BenchmarkSuite.default()
        ids = {d.dataset_id for d in suite.datasets}
        assert {"iterater", "jfleg", "asset", "turkcorpus", "discofuse", "gyafc", "wnc",
                "mrpc", "sts", "qqp", "compression", "politeness"} == ids
        assert dict(suite.keys()).__class__  # keys() well-formed

    def test_from_json(self, tmp_path):
        raw = {"datasets": [
            {"dataset_id": "mini", "task": "gec", "metrics": ["sari"], "loader": "jsonl_eval"},
            {"dataset_id": "combo", "task": "gec+simplification", "metrics": ["sari"],
             "loader": "jsonl_eval"},
        ]}
        path = tmp_path / "suite.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        suite = BenchmarkSuite.from_json(path)
        assert suite.datasets[1].task == parse_task("gec+simplification")

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            DatasetSpec("x", EditTask.GEC, ("made_up_metric",))
