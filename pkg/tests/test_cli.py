import json

from click.testing import CliRunner

from texhtml.cli import main

DOC = "\\documentclass{article}\\begin{document}%s\\end{document}"


def make_bundle(tmp_path, body, name="b"):
    d = tmp_path / name
    d.mkdir()
    (d / "main.tex").write_text(DOC % body)
    return d


def test_convert_success_exit_zero(tmp_path):
    bundle = make_bundle(tmp_path, "hi")
    out = tmp_path / "page.html"
    result = CliRunner().invoke(main, ["convert", str(bundle), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "hi" in out.read_text()


def test_convert_errors_exit_one(tmp_path):
    bundle = make_bundle(tmp_path, r"\begin{itemize}\item x\end{enumerate}")
    result = CliRunner().invoke(
        main, ["convert", str(bundle), "--out", str(tmp_path / "p.html")])
    assert result.exit_code == 1


def test_convert_failed_exit_two(tmp_path):
    bundle = make_bundle(tmp_path, r"\def\x{\x}\x")
    result = CliRunner().invoke(
        main, ["convert", str(bundle), "--fuel", "500",
               "--out", str(tmp_path / "p.html")])
    assert result.exit_code == 2


def test_convert_invalid_bundle_exit_three(tmp_path):
    d = tmp_path / "empty"
    d.mkdir()
    (d / "main.tex").write_text("no class")
    result = CliRunner().invoke(main, ["convert", str(d)])
    assert result.exit_code == 3


def test_batch_writes_report(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    make_bundle(corpus, "a", "p1")
    make_bundle(corpus, "b", "p2")
    out = tmp_path / "report.json"
    result = CliRunner().invoke(
        main, ["batch", str(corpus), "--jobs", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["total"] == 2


def test_plan_from_previous_report(tmp_path):
    previous = tmp_path / "prev.json"
    previous.write_text(json.dumps({"papers": [
        {"paperId": "a", "converterVersion": "0.0.1", "unknownPackages": []},
    ]}))
    result = CliRunner().invoke(main, ["plan", "--previous", str(previous)])
    assert result.exit_code == 0, result.output
    assert "a" in result.output
