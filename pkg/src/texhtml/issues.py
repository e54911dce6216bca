"""Issue-report storage: append-only newline-delimited records with an
in-memory index rebuilt at startup.

Reports with the same (paper, normalized snippet) pair are flagged as
duplicates of the earliest such report but are still stored.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional


class ValidationError(ValueError):
    pass


def normalize_snippet(snippet: Optional[str]) -> str:
    if snippet is None:
        return ""
    return " ".join(snippet.split()).casefold()


def dedup_key(paper_id: str, snippet: Optional[str]) -> str:
    material = paper_id + "\x00" + normalize_snippet(snippet)
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass
class IssueReport:
    report_id: str
    paper_id: str
    snippet: Optional[str]
    description: str
    created_at: float
    dedup_key: str
    duplicate_of: Optional[str] = None

    def to_wire(self) -> dict:
        record = {
            "reportId": self.report_id,
            "paperId": self.paper_id,
            "description": self.description,
            "createdAt": self.created_at,
            "dedupKey": self.dedup_key,
        }
        if self.snippet is not None:
            record["snippet"] = self.snippet
        if self.duplicate_of is not None:
            record["duplicateOf"] = self.duplicate_of
        return record

    @classmethod
    def from_wire(cls, record: dict) -> "IssueReport":
        return cls(
            report_id=record["reportId"],
            paper_id=record["paperId"],
            snippet=record.get("snippet"),
            description=record["description"],
            created_at=record["createdAt"],
            dedup_key=record["dedupKey"],
            duplicate_of=record.get("duplicateOf"),
        )


class IssueStore:
    """Single-writer append-only store; reads are index lookups."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._by_paper: dict[str, list[IssueReport]] = {}
        self._primary_by_key: dict[str, str] = {}  # dedupKey -> first reportId
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            report = IssueReport.from_wire(json.loads(line))
            self._index(report)

    def _index(self, report: IssueReport) -> None:
        self._by_paper.setdefault(report.paper_id, []).append(report)
        if report.duplicate_of is None:
            self._primary_by_key.setdefault(report.dedup_key, report.report_id)

    def submit_report(self, paper_id: str, snippet: Optional[str],
                      description: str) -> IssueReport:
        if not paper_id:
            raise ValidationError("paperId must not be empty")
        if not description:
            raise ValidationError("description must not be empty")
        with self._lock:
            key = dedup_key(paper_id, snippet)
            duplicate_of = self._primary_by_key.get(key)
            report = IssueReport(
                report_id=uuid.uuid4().hex,
                paper_id=paper_id,
                snippet=snippet,
                description=description,
                created_at=time.time(),
                dedup_key=key,
                duplicate_of=duplicate_of,
            )
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(report.to_wire(), sort_keys=True) + "\n")
            self._index(report)
            return report

    def list_reports(self, paper_id: str) -> list[IssueReport]:
        """Non-duplicate reports for a paper, newest first."""
        reports = [r for r in self._by_paper.get(paper_id, [])
                   if r.duplicate_of is None]
        return sorted(reports, key=lambda r: r.created_at, reverse=True)

    def all_reports(self) -> list[IssueReport]:
        return [r for reports in self._by_paper.values() for r in reports]
