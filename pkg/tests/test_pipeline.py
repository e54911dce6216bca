import pytest
from hypothesis import given, settings, strategies as st

from texhtml.diagnostics import Severity
from texhtml.pipeline import (ConvertOptions, NoMainFile, SourceBundle, Status,
                              convert, detect_main_file)

DOC = rb"\documentclass{article}\begin{document}%s\end{document}"


def bundle(body=b"Hello.", paper_id="p/1", extra=None, main=rb"main.tex"):
    files = {"main.tex": DOC % body}
    files.update(extra or {})
    return SourceBundle(paper_id=paper_id, files=files)


def test_clean_document_succeeds():
    result = convert(bundle())
    assert result.status is Status.SUCCESS
    assert result.html is not None
    assert "Hello." in result.html.html
    assert result.exit_code() == 0


def test_unknown_package_yields_warning_status():
    result = convert(bundle(rb"\usepackage{tikz} x"))
    assert result.status is Status.SUCCESS_WITH_WARNINGS
    assert result.html is not None
    assert "tikz" in result.html.html
    assert result.exit_code() == 0


def test_environment_mismatch_yields_errors_but_readable():
    result = convert(bundle(rb"\begin{itemize}\item x\end{enumerate}"))
    assert result.status is Status.ERRORS_BUT_READABLE
    assert result.html is not None
    assert result.exit_code() == 1


def test_fuel_exhaustion_fails_without_html():
    result = convert(bundle(rb"\def\x{\x}\x"), ConvertOptions(fuel=500))
    assert result.status is Status.FAILED
    assert result.html is None
    assert any(d.code == "fuel-exhausted" for d in result.diagnostics)
    assert result.exit_code() == 2


def test_empty_bundle_is_invalid():
    result = convert(SourceBundle(paper_id="p/e", files={}))
    assert result.status is Status.FAILED
    assert result.bundle_invalid
    assert result.exit_code() == 3


def test_no_documentclass_is_invalid():
    result = convert(SourceBundle(paper_id="p/n", files={"a.tex": b"plain"}))
    assert result.bundle_invalid
    assert result.exit_code() == 3


def test_main_file_detection_unique():
    files = {"helper.tex": b"x", "paper.tex": DOC % b"y"}
    name, diags = detect_main_file(files)
    assert name == "paper.tex"
    assert diags == []


def test_main_file_tie_breaks_lexicographically():
    files = {"b.tex": DOC % b"x", "a.tex": DOC % b"y"}
    name, diags = detect_main_file(files)
    assert name == "a.tex"
    assert any(d.code == "main-file-tie" for d in diags)


def test_main_file_detection_raises_when_absent():
    with pytest.raises(NoMainFile):
        detect_main_file({"a.tex": b"no class here"})


def test_input_spliced_from_bundle():
    result = convert(bundle(rb"\input{part}", extra={"part.tex": b"SPLICED"}))
    assert result.status is Status.SUCCESS
    assert "SPLICED" in result.html.html


def test_missing_input_warns_but_converts():
    result = convert(bundle(rb"\input{ghost} rest"))
    assert result.status is Status.SUCCESS_WITH_WARNINGS
    assert any(d.code == "missing-input" for d in result.diagnostics)
    assert "rest" in result.html.html


def test_input_cycle_terminates():
    result = convert(bundle(rb"\input{a}", extra={"a.tex": rb"\input{a}"}))
    assert result.status is not None
    assert isinstance(result.status, Status)


def test_undecodable_file_is_invalid_bundle():
    result = convert(SourceBundle(paper_id="p/b", files={"main.tex": b"\xff\xfe" * 8}))
    assert result.status is Status.FAILED


def test_failed_never_carries_html_and_vice_versa():
    cases = [
        bundle(),
        bundle(rb"\usepackage{tikz} x"),
        bundle(rb"\begin{a}\end{b}"),
        SourceBundle(paper_id="x", files={}),
    ]
    for b in cases:
        r = convert(b, ConvertOptions(fuel=2000))
        assert (r.html is None) == (r.status is Status.FAILED)


def test_from_directory(tmp_path):
    (tmp_path / "main.tex").write_bytes(DOC % b"dir body")
    sub = tmp_path / "figs"
    sub.mkdir()
    (sub / "note.tex").write_bytes(b"note")
    b = SourceBundle.from_directory(tmp_path, paper_id="p/d")
    assert "main.tex" in b.files
    assert "figs/note.tex" in b.files
    result = convert(b)
    assert result.status is Status.SUCCESS


@given(st.binary(max_size=400))
@settings(max_examples=200, deadline=None)
def test_convert_total_on_arbitrary_bytes(data):
    result = convert(SourceBundle(paper_id="fuzz", files={"main.tex": data}),
                     ConvertOptions(fuel=5000))
    assert isinstance(result.status, Status)
    assert (result.html is None) == (result.status is Status.FAILED)
    if result.status is Status.FAILED:
        assert any(d.severity is Severity.ERROR for d in result.diagnostics)
