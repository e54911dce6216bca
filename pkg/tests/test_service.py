import pytest
from fastapi.testclient import TestClient

from texhtml.issues import IssueStore
from texhtml.service import create_app


@pytest.fixture
def client(tmp_path):
    store = IssueStore(tmp_path / "reports.ndjson")
    return TestClient(create_app(store=store))


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200


def test_submit_report_created(client):
    resp = client.post("/reports", json={
        "paperId": "2301.00001", "snippet": "broken formula",
        "description": "math is garbled"})
    assert resp.status_code == 201
    body = resp.json()
    assert body["reportId"]
    assert "duplicateOf" not in body


def test_submit_duplicate_points_to_primary(client):
    first = client.post("/reports", json={
        "paperId": "p/1", "snippet": "The Proof", "description": "a"}).json()
    dup = client.post("/reports", json={
        "paperId": "p/1", "snippet": " the  proof ", "description": "b"})
    assert dup.status_code == 201
    assert dup.json()["duplicateOf"] == first["reportId"]


def test_snippet_optional(client):
    resp = client.post("/reports", json={"paperId": "p/1", "description": "d"})
    assert resp.status_code == 201


def test_validation_rejects_missing_fields(client):
    assert client.post("/reports", json={"paperId": "p/1"}).status_code == 422
    assert client.post("/reports", json={
        "paperId": "", "description": "d"}).status_code == 422


def test_list_reports_for_paper(client):
    client.post("/reports", json={"paperId": "p/1", "snippet": "a",
                                  "description": "one"})
    client.post("/reports", json={"paperId": "p/1", "snippet": "a",
                                  "description": "dup"})
    client.post("/reports", json={"paperId": "p/2", "snippet": "b",
                                  "description": "other"})
    resp = client.get("/reports/p/1")
    assert resp.status_code == 200
    reports = resp.json()
    assert len(reports) == 1
    assert reports[0]["paperId"] == "p/1"
    assert {"reportId", "snippet", "description", "createdAt"} <= set(reports[0])


def test_list_unknown_paper_is_empty(client):
    resp = client.get("/reports/nope")
    assert resp.status_code == 200
    assert resp.json() == []


def test_cors_headers_present(client):
    resp = client.get("/health", headers={"Origin": "https://example.org"})
    assert resp.headers.get("access-control-allow-origin") in ("*", "https://example.org")


def test_convert_endpoint(client):
    resp = client.post("/convert", json={
        "paperId": "p/1",
        "source": "\\documentclass{article}\\begin{document}Hi\\end{document}"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "Success"
    assert "Hi" in body["html"]


def test_convert_endpoint_failure_has_no_html(client):
    resp = client.post("/convert", json={"paperId": "p/1", "source": "no class"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "Failed"
    assert body.get("html") in (None, "")
