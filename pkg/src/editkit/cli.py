"""Command-line interface: build datasets, score outputs, run evaluations, report."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .builder import BuildConfig, BuildManifest, audit as audit_build, build as run_build
from .core import ScoreReport
from .datasets import FETCHABLE, fetch
from .gateway import EndpointConfig
from .harness import BenchmarkSuite, SystemUnderTest, run as run_eval
from .metrics import (
    MetricInput,
    compression_ratio,
    corpus_gleu,
    corpus_sari,
    corpus_self_bleu,
    exact_match,
)
from .reporting import render_csv, render_text, write_report


@click.group()
def main():
    """Toolkit for instruction-based text editing datasets and evaluation."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["instruction", "prefix", "randomized"]), default=None,
              help="Override the config's build mode.")
@click.option("--seed", type=int, default=None, help="Override the config's master seed.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def build(config_path: str, mode: str | None, seed: int | None, out_dir: str):
    """Build instruction datasets from configured corpora."""
    config = BuildConfig.from_json(config_path, mode=mode, seed=seed)
    manifest = run_build(config, out_dir)
    for task, counts in sorted(manifest.counts.items()):
        click.echo(f"{task}: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    click.echo(f"manifest: {Path(out_dir) / 'manifest.json'}")


@main.command("audit")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
def audit_cmd(manifest_path: str):
    """Verify emitted record files against their manifest and the template bank."""
    report = audit_build(BuildManifest.load(manifest_path))
    click.echo(f"checked {report.checked_records} records")
    if report.passed:
        click.echo("audit: PASS")
    else:
        for failure in report.failures[:50]:
            click.echo(f"audit: {failure}", err=True)
        click.echo(f"audit: FAIL ({len(report.failures)} problems)", err=True)
        sys.exit(1)


def _read_lines(path: str) -> list[str]:
    return Path(path).read_text(encoding="utf-8").rstrip("\n").split("\n")


@main.command()
@click.option("--metric", required=True,
              type=click.Choice(["sari", "gleu", "em", "self_bleu", "self_bleu_source", "cr"]))
@click.option("--hyp", "hyp_path", required=True, type=click.Path(exists=True))
@click.option("--src", "src_path", required=True, type=click.Path(exists=True))
@click.option("--refs", "ref_paths", multiple=True, type=click.Path(exists=True))
def score(metric: str, hyp_path: str, src_path: str, ref_paths: tuple[str, ...]):
    """Score a hypothesis file against source/reference files (one sentence per line)."""
    sources = _read_lines(src_path)
    hyps = _read_lines(hyp_path)
    refs = [_read_lines(p) for p in ref_paths]
    if len(hyps) != len(sources) or any(len(r) != len(sources) for r in refs):
        raise click.ClickException("source/hypothesis/reference files must have equal line counts")
    items = [
        MetricInput(source=s, hypothesis=h, references=tuple(r[i] for r in refs))
        for i, (s, h) in enumerate(zip(sources, hyps))
    ]
    fn = {
        "sari": corpus_sari,
        "gleu": corpus_gleu,
        "em": exact_match,
        "self_bleu": lambda xs: corpus_self_bleu(xs, against="references"),
        "self_bleu_source": lambda xs: corpus_self_bleu(xs, against="source"),
        "cr": compression_ratio,
    }[metric]
    try:
        value = fn(items)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{metric}: {value:.4f}")


@main.command("eval")
@click.option("--suite", "suite_path", default=None, type=click.Path(exists=True),
              help="Suite JSON; defaults to the built-in benchmark suite.")
@click.option("--system", "system_kind", required=True,
              type=click.Choice(["copy", "endpoint", "outputs-file", "chain"]))
@click.option("--endpoint-config", "endpoint_path", default=None, type=click.Path(exists=True))
@click.option("--outputs", "outputs_dir", default=None, type=click.Path(exists=True),
              help="Directory of <dataset_id>.txt files for outputs-file systems.")
@click.option("--system-id", default=None, help="Row label; defaults to the system kind.")
@click.option("--data-root", default="data", type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_cmd(suite_path, system_kind, endpoint_path, outputs_dir, system_id, data_root, seed, out_dir):
    """Run one system over the benchmark suite and write a score report."""
    suite = BenchmarkSuite.from_json(suite_path) if suite_path else BenchmarkSuite.default()
    endpoint = EndpointConfig.from_json(endpoint_path) if endpoint_path else None
    system = SystemUnderTest(
        kind=system_kind, endpoint=endpoint, outputs_dir=outputs_dir, system_id=system_id
    )
    report = run_eval(suite, system, data_root=data_root, out_dir=out_dir, seed=seed)
    failures = 0
    for row in report.rows:
        if row.value is None:
            click.echo(f"{row.dataset_id}:{row.metric_name} FAILED ({row.error})", err=True)
            failures += 1
        else:
            click.echo(f"{row.dataset_id}:{row.metric_name} = {row.value:.2f}")
    if failures:
        click.echo(f"{failures} rows failed", err=True)
        sys.exit(1)


@main.command("report")
@click.option("--inputs", "input_paths", multiple=True, required=True, type=click.Path(exists=True),
              help="report-<system>.json files produced by `editkit eval`.")
@click.option("--format", "fmt", type=click.Choice(["csv", "txt"]), default="txt")
@click.option("--out", "out_dir", default=None, type=click.Path(),
              help="Also write report.csv/report.txt and figures/*.png here.")
def report_cmd(input_paths: tuple[str, ...], fmt: str, out_dir: str | None):
    """Render score reports as a systems x (dataset, metric) table."""
    reports = [
        ScoreReport.from_record(json.loads(Path(p).read_text(encoding="utf-8")))
        for p in input_paths
    ]
    if out_dir:
        written = write_report(reports, out_dir)
        for kind, path in written.items():
            click.echo(f"wrote {kind}: {path}", err=True)
    click.echo(render_csv(reports) if fmt == "csv" else render_text(reports), nl=False)


@main.command("fetch-data")
@click.option("--dataset", "dataset_id", required=True,
              type=click.Choice(sorted(FETCHABLE) + ["all"]))
@click.option("--dest", "data_root", default="data", type=click.Path())
def fetch_data(dataset_id: str, data_root: str):
    """Download freely available test sets (needs network access)."""
    import requests

    targets = sorted(FETCHABLE) if dataset_id == "all" else [dataset_id]
    for ds in targets:
        try:
            path = fetch(ds, data_root)
        except requests.RequestException as exc:
            raise click.ClickException(f"download of {ds} failed: {exc}") from exc
        click.echo(f"{ds}: {path}")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8321)
def serve(store_dir: str, host: str, port: int):
    """Run the pairwise annotation service."""
    import uvicorn

    from .annotation import StudyStore, create_app

    app = create_app(StudyStore(store_dir))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
