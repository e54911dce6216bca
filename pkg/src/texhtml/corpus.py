"""Batch conversion over a directory of source bundles, with the outcome
taxonomy aggregated and reconversion cost estimated.

Cost arithmetic uses Decimal so report figures are exact; aggregation is
order-insensitive so any parallelism yields the same report.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Union

from .pipeline import (ConversionResult, ConvertOptions, NoMainFile,
                       SourceBundle, Status, convert)
from .packages import PackageRegistry
from .diagnostics import error

CONVERTER_VERSION = "0.1.0"

Money = Union[Decimal, str, float, int]


class CorpusUnreadable(Exception):
    pass


def as_money(value: Money) -> Decimal:
    """Exact currency value; floats go through str() to avoid binary noise."""
    if isinstance(value, Decimal):
        return value
    return Decimal(str(value))


def estimate_cost(article_count: int, cost_per_article: Money) -> Decimal:
    """Total reconversion cost: count x per-article cost, exactly."""
    if article_count < 0:
        raise ValueError("article count cannot be negative")
    return article_count * as_money(cost_per_article)


@dataclass
class PaperRecord:
    paper_id: str
    status: Status
    converter_version: str
    unknown_packages: list[str]
    error_count: int
    warning_count: int
    timing_ms: float


@dataclass
class CorpusReport:
    total: int
    per_status: dict[str, int]
    error_rate: float
    fail_rate: float
    cost_estimate: Decimal
    elapsed_seconds: float
    converter_version: str
    cost_per_article: Decimal
    papers: list[PaperRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "perStatus": dict(self.per_status),
            "errorRate": self.error_rate,
            "failRate": self.fail_rate,
            "costEstimate": str(self.cost_estimate),
            "costPerArticle": str(self.cost_per_article),
            "elapsedSeconds": self.elapsed_seconds,
            "converterVersion": self.converter_version,
            "papers": [
                {
                    "paperId": p.paper_id,
                    "status": p.status.value,
                    "converterVersion": p.converter_version,
                    "unknownPackages": p.unknown_packages,
                    "errorCount": p.error_count,
                    "warningCount": p.warning_count,
                    "timingMs": p.timing_ms,
                }
                for p in self.papers
            ],
        }

    def to_text(self) -> str:
        lines = [
            f"corpus report (converter {self.converter_version})",
            f"  total bundles: {self.total}",
        ]
        for status in Status:
            lines.append(f"  {status.value}: {self.per_status.get(status.value, 0)}")
        lines.append(f"  error rate: {self.error_rate:.1%}")
        lines.append(f"  fail rate: {self.fail_rate:.1%}")
        lines.append(f"  reconversion cost estimate: ${self.cost_estimate}")
        lines.append(f"  elapsed: {self.elapsed_seconds:.2f}s")
        return "\n".join(lines)


def _record(result: ConversionResult) -> PaperRecord:
    errors = sum(1 for d in result.diagnostics if d.severity.value == "error")
    warns = sum(1 for d in result.diagnostics if d.severity.value == "warning")
    return PaperRecord(
        paper_id=result.paper_id,
        status=result.status,
        converter_version=CONVERTER_VERSION,
        unknown_packages=sorted(result.unknown_packages),
        error_count=errors,
        warning_count=warns,
        timing_ms=result.timing_ms,
    )


def _convert_bundle_dir(bundle_dir: Path, registry: PackageRegistry,
                        options: ConvertOptions, write_html: bool) -> ConversionResult:
    try:
        bundle = SourceBundle.from_directory(bundle_dir)
    except NoMainFile as exc:
        return ConversionResult(
            bundle_dir.name, Status.FAILED,
            [error("pipeline", "bundle-invalid", str(exc))])
    result = convert(bundle, registry, options)
    if write_html and result.html is not None:
        out = bundle_dir / f"{result.paper_id}.html"
        out.write_text(result.html.html, encoding="utf-8")
    return result


def aggregate(results: Iterable[ConversionResult], cost_per_article: Money,
              elapsed_seconds: float = 0.0) -> CorpusReport:
    """Order-insensitive aggregation: records are sorted by paper id."""
    records = sorted((_record(r) for r in results), key=lambda p: p.paper_id)
    per_status = {s.value: 0 for s in Status}
    for rec in records:
        per_status[rec.status.value] += 1
    total = len(records)
    failed = per_status[Status.FAILED.value]
    errors = per_status[Status.ERRORS_BUT_READABLE.value] + failed
    cost = as_money(cost_per_article)
    return CorpusReport(
        total=total,
        per_status=per_status,
        error_rate=(errors / total) if total else 0.0,
        fail_rate=(failed / total) if total else 0.0,
        cost_estimate=estimate_cost(total, cost),
        elapsed_seconds=elapsed_seconds,
        converter_version=CONVERTER_VERSION,
        cost_per_article=cost,
        papers=records,
    )


def run_batch(corpus_dir: Path, parallelism: int = 4,
              cost_per_article: Money = "0.015",
              registry: Optional[PackageRegistry] = None,
              options: Optional[ConvertOptions] = None,
              out_path: Optional[Path] = None,
              write_html: bool = True) -> CorpusReport:
    """Convert every bundle subdirectory of `corpus_dir`. Failures of
    individual bundles never stop the batch."""
    corpus_dir = Path(corpus_dir)
    try:
        bundle_dirs = sorted(d for d in corpus_dir.iterdir() if d.is_dir())
    except OSError as exc:
        raise CorpusUnreadable(f"cannot read corpus directory: {exc}") from exc
    registry = registry or PackageRegistry()
    options = options or ConvertOptions()

    start = time.monotonic()
    if parallelism <= 1:
        results = [_convert_bundle_dir(d, registry, options, write_html)
                   for d in bundle_dirs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(
                lambda d: _convert_bundle_dir(d, registry, options, write_html),
                bundle_dirs))
    report = aggregate(results, cost_per_article, time.monotonic() - start)

    if out_path is not None:
        Path(out_path).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        Path(out_path).with_suffix(".txt").write_text(
            report.to_text() + "\n", encoding="utf-8")
    return report


def plan_reconversion(previous_report: dict, current_version: str,
                      changed_packages: set[str]) -> list[str]:
    """Papers needing reconversion: recorded with a different converter
    version, or touching a package whose handler changed."""
    selected: set[str] = set()
    for paper in previous_report.get("papers", []):
        paper_id = paper["paperId"]
        if paper.get("converterVersion") != current_version:
            selected.add(paper_id)
        elif changed_packages & set(paper.get("unknownPackages", [])):
            selected.add(paper_id)
    return sorted(selected)
