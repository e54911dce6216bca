import re

from texhtml.docmodel import parse, resolve_refs
from texhtml.emitter import (UNKNOWN_PACKAGE_BANNER, EmitOptions, check_well_formed,
                             emit)
from texhtml.lexer import tokenize
from texhtml.macros import ExpansionBudget, expand
from texhtml.packages import PackageRegistry, base_environment


def render(source, paper_id="t/0001"):
    tokens, _ = tokenize(source)
    result = expand(tokens, base_environment(), ExpansionBudget())
    doc = resolve_refs(parse(result.tokens, PackageRegistry()))
    return emit(doc, EmitOptions(paper_id=paper_id))


def test_page_skeleton():
    art = render(r"\title{T}\maketitle Hello.")
    html = art.html
    assert html.startswith("<!DOCTYPE html>")
    assert 'lang="en"' in html
    assert 'data-paper-id="t/0001"' in html
    assert "<h1>T</h1>" in html
    assert "Experimental" in html
    assert 'data-role="report-issue"' in html
    assert check_well_formed(html) == []


def test_exactly_one_dark_scheme_rule():
    html = render("x").html
    assert html.count("@media (prefers-color-scheme: dark)") == 1


def test_no_inline_color_styles():
    html = render(r"\section{A} text $x$").html
    for style in re.findall(r'style="([^"]*)"', html):
        assert "color" not in style


def test_section_heading_levels():
    html = render(r"\section{One}\subsection{Two} body").html
    assert "<h2>" in html and "One" in html
    assert "<h3>" in html and "Two" in html
    assert html.count("<section") == 2


def test_banner_only_with_unknown_packages():
    with_banner = render(r"\usepackage{tikz} x")
    without = render(r"\usepackage{graphicx} x")
    assert with_banner.includes_banner
    assert UNKNOWN_PACKAGE_BANNER in with_banner.html
    assert "tikz" in with_banner.html
    assert not without.includes_banner
    assert UNKNOWN_PACKAGE_BANNER not in without.html


def test_banner_is_first_element_in_body():
    html = render(r"\usepackage{tikz} x").html
    body = html.split("<body>", 1)[1]
    first_tag = re.search(r"<(\w+)[ >]", body).group(1)
    assert first_tag == "div"
    assert "unknown-package" in body.split(">", 1)[0] + body[:200]


def test_math_carries_source_annotation():
    html = render(r"$x+y$ and $\tikzmagic{q}$").html
    assert 'data-tex="x+y"' in html
    # unsupported math falls back to escaped source text, still annotated
    assert html.count("data-tex=") == 2
    assert "math-fallback" in html


def test_verbatim_preserved_in_pre():
    art = render("\\begin{verbatim}\na < b & c\n\\end{verbatim}")
    assert "<pre>" in art.html
    assert "a &lt; b &amp; c" in art.html


def test_unresolved_ref_rendered_as_question_marks():
    assert "??" in render(r"\ref{nope}").html


def test_figure_alt_text_emitted():
    html = render(
        r"\begin{figure}\includegraphics[alt=a chart]{f.png}"
        r"\caption{C}\end{figure}").html
    assert 'alt="a chart"' in html
    assert "<figcaption>" in html


def test_lists_tables_links():
    html = render(
        r"\begin{enumerate}\item a\end{enumerate}"
        r"\begin{tabular}{ll} p & q \\ r & s \end{tabular}"
        r"\url{https://example.org}").html
    assert "<ol>" in html and "<li>" in html
    assert "<table>" in html and html.count("<td>") == 4
    assert '<a href="https://example.org">' in html


def test_html_escaping_of_text():
    html = render("a <script> & b").html
    assert "<script>" not in html
    assert "&lt;script&gt;" in html


def test_check_well_formed_catches_problems():
    assert check_well_formed("<div><p>x</div>") != []
    assert check_well_formed("<div></div><div></div>") != []
    assert check_well_formed("<div><br><img src='x' alt=''></div>") == []


def test_every_fixture_page_is_well_formed():
    sources = [
        "",
        r"\section{A} hi",
        r"\usepackage{tikz}\begin{tikzpicture}x\end{tikzpicture}",
        r"\begin{itemize}\item $x^2$\end{itemize}",
        r"\begin{equation}e=mc^2\end{equation}",
    ]
    for src in sources:
        assert check_well_formed(render(src).html) == []
