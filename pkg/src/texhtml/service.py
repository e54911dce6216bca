"""HTTP service: issue-report intake plus a conversion endpoint wrapping
the pipeline. Cross-origin requests are allowed so locally opened pages
can talk to it."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Response, status
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .corpus import CONVERTER_VERSION
from .issues import IssueStore
from .packages import PackageRegistry
from .pipeline import ConvertOptions, SourceBundle, convert

DEFAULT_DATA_FILE = "issue-reports.ndjson"


class ReportRequest(BaseModel):
    paperId: str = Field(min_length=1)
    snippet: Optional[str] = None
    description: str = Field(min_length=1)


class ReportResponse(BaseModel):
    reportId: str
    duplicateOf: Optional[str] = None


class ReportSummary(BaseModel):
    reportId: str
    paperId: str
    snippet: Optional[str] = None
    description: str
    createdAt: float


class DiagnosticModel(BaseModel):
    severity: str
    stage: str
    code: str
    message: str


class ConvertRequest(BaseModel):
    paperId: str = Field(min_length=1)
    source: str = Field(min_length=1)


class ConvertResponse(BaseModel):
    paperId: str
    status: str
    html: Optional[str] = None
    diagnostics: list[DiagnosticModel]
    unknownPackages: list[str]


def create_app(store: Optional[IssueStore] = None,
               registry: Optional[PackageRegistry] = None,
               data_dir: Optional[Path] = None) -> FastAPI:
    data_dir = Path(data_dir) if data_dir else Path(".")
    store = store or IssueStore(data_dir / DEFAULT_DATA_FILE)
    registry = registry or PackageRegistry()

    app = FastAPI(title="texhtml", version=CONVERTER_VERSION)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": CONVERTER_VERSION}

    @app.post("/reports", response_model=ReportResponse,
              status_code=status.HTTP_201_CREATED,
              response_model_exclude_none=True)
    def submit_report(req: ReportRequest) -> ReportResponse:
        report = store.submit_report(req.paperId, req.snippet, req.description)
        return ReportResponse(reportId=report.report_id,
                              duplicateOf=report.duplicate_of)

    @app.get("/reports/{paper_id:path}", response_model=list[ReportSummary],
             response_model_exclude_none=True)
    def list_reports(paper_id: str) -> list[ReportSummary]:
        return [
            ReportSummary(reportId=r.report_id, paperId=r.paper_id,
                          snippet=r.snippet, description=r.description,
                          createdAt=r.created_at)
            for r in store.list_reports(paper_id)
        ]

    @app.post("/convert", response_model=ConvertResponse,
              response_model_exclude_none=True)
    def convert_source(req: ConvertRequest) -> ConvertResponse:
        bundle = SourceBundle(req.paperId,
                              {"main.tex": req.source.encode("utf-8")},
                              "main.tex")
        result = convert(bundle, registry, ConvertOptions())
        return ConvertResponse(
            paperId=req.paperId,
            status=result.status.value,
            html=result.html.html if result.html else None,
            diagnostics=[
                DiagnosticModel(severity=d.severity.value, stage=d.stage,
                                code=d.code, message=d.message)
                for d in result.diagnostics
            ],
            unknownPackages=sorted(result.unknown_packages),
        )

    return app
