"""Command-line interface.

`convert`, `batch` and `plan` run the converter locally; `serve` starts
the HTTP service; `report` is a thin client for a running service.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .corpus import (CONVERTER_VERSION, CorpusUnreadable, plan_reconversion,
                     run_batch)
from .docmodel import document_to_dict
from .packages import PackageRegistry
from .pipeline import ConvertOptions, NoMainFile, SourceBundle, convert


def _build_registry(handler_dir: Path | None) -> PackageRegistry:
    registry = PackageRegistry()
    if handler_dir is not None:
        for d in registry.load_directory(handler_dir):
            click.echo(d.format(), err=True)
    return registry


@click.group()
@click.version_option(CONVERTER_VERSION)
def main() -> None:
    """Structure-preserving LaTeX-subset to accessible HTML converter."""


@main.command("convert")
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Output HTML path (default: <paper-id>.html beside the bundle).")
@click.option("--fuel", type=int, default=100_000, show_default=True,
              help="Macro substitution budget.")
@click.option("--dump-ast", is_flag=True, help="Print the document AST as JSON.")
@click.option("--handlers", type=click.Path(exists=True, file_okay=False, path_type=Path),
              default=None, help="Directory of extra package handler files (*.pkg).")
@click.option("--reader-chrome", default=None,
              help="URL of the reader chrome script to reference from the page.")
def convert_cmd(bundle_dir: Path, out: Path | None, fuel: int, dump_ast: bool,
                handlers: Path | None, reader_chrome: str | None) -> None:
    """Convert one source bundle directory to HTML."""
    registry = _build_registry(handlers)
    try:
        bundle = SourceBundle.from_directory(bundle_dir)
    except NoMainFile as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    options = ConvertOptions(fuel=fuel, reader_chrome_url=reader_chrome)
    result = convert(bundle, registry, options)
    for d in result.diagnostics:
        click.echo(d.format(), err=True)
    if dump_ast and result.document is not None:
        click.echo(json.dumps(document_to_dict(result.document), indent=2))
    if result.html is not None:
        target = out or (bundle_dir / f"{result.paper_id}.html")
        target.write_text(result.html.html, encoding="utf-8")
        click.echo(f"{result.status.value}: wrote {target}")
    else:
        click.echo(f"{result.status.value}: no HTML produced", err=True)
    sys.exit(result.exit_code())


@main.command("batch")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--jobs", "-j", type=int, default=4, show_default=True)
@click.option("--cost-per-article", default="0.015", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write the machine-readable report here (plus .txt beside it).")
@click.option("--handlers", type=click.Path(exists=True, file_okay=False, path_type=Path),
              default=None)
def batch_cmd(corpus_dir: Path, jobs: int, cost_per_article: str,
              out: Path | None, handlers: Path | None) -> None:
    """Convert every bundle under CORPUS_DIR and aggregate the outcomes."""
    registry = _build_registry(handlers)
    try:
        report = run_batch(corpus_dir, parallelism=jobs,
                           cost_per_article=cost_per_article,
                           registry=registry, out_path=out)
    except CorpusUnreadable as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(report.to_text())


@main.command("plan")
@click.option("--previous", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Machine-readable report from a previous batch run.")
@click.option("--changed-packages", default="",
              help="Comma-separated package names whose handlers changed.")
@click.option("--version", "version_", default=CONVERTER_VERSION, show_default=True,
              help="Current converter version to compare against.")
def plan_cmd(previous: Path, changed_packages: str, version_: str) -> None:
    """List papers that need reconversion."""
    report = json.loads(previous.read_text(encoding="utf-8"))
    changed = {p.strip() for p in changed_packages.split(",") if p.strip()}
    for paper_id in plan_reconversion(report, version_, changed):
        click.echo(paper_id)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8035, show_default=True)
@click.option("--data-dir", type=click.Path(file_okay=False, path_type=Path),
              default=Path("."), show_default=True,
              help="Directory holding the issue-report store.")
def serve_cmd(host: str, port: int, data_dir: Path) -> None:
    """Run the HTTP service (conversion + issue reports)."""
    import uvicorn

    from .service import create_app

    data_dir.mkdir(parents=True, exist_ok=True)
    uvicorn.run(create_app(data_dir=data_dir), host=host, port=port)


@main.group("report")
def report_group() -> None:
    """Thin client for a running issue-intake service."""


@report_group.command("submit")
@click.option("--server", default="http://127.0.0.1:8035", show_default=True)
@click.option("--paper-id", required=True)
@click.option("--description", required=True)
@click.option("--snippet", default=None)
def report_submit(server: str, paper_id: str, description: str,
                  snippet: str | None) -> None:
    import httpx

    body = {"paperId": paper_id, "description": description}
    if snippet is not None:
        body["snippet"] = snippet
    resp = httpx.post(f"{server}/reports", json=body)
    resp.raise_for_status()
    click.echo(json.dumps(resp.json(), indent=2))


@report_group.command("list")
@click.option("--server", default="http://127.0.0.1:8035", show_default=True)
@click.option("--paper-id", required=True)
def report_list(server: str, paper_id: str) -> None:
    import httpx

    resp = httpx.get(f"{server}/reports/{paper_id}")
    resp.raise_for_status()
    click.echo(json.dumps(resp.json(), indent=2))


if __name__ == "__main__":
    main()
