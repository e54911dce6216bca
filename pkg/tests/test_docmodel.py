import string

from hypothesis import given, settings, strategies as st

from texhtml.diagnostics import Severity
from texhtml.docmodel import (Document, Figure, ListNode, MathDisplay,
                              MathInline, Paragraph, Quote, Ref, Section,
                              Table, Text, UnknownCommand, UnknownEnvironment,
                              Verbatim, document_to_dict, parse, resolve_refs)
from texhtml.lexer import tokenize
from texhtml.macros import ExpansionBudget, MacroEnvironment, expand
from texhtml.packages import PackageRegistry, base_environment


def doc_of(source, registry=None):
    tokens, _ = tokenize(source)
    result = expand(tokens, base_environment(), ExpansionBudget())
    return parse(result.tokens, registry or PackageRegistry())


def para_text(node):
    assert isinstance(node, Paragraph)
    return "".join(i.value for i in node.inlines if isinstance(i, Text))


def test_section_with_paragraph():
    doc = doc_of(r"\section{Intro} Hello.")
    assert len(doc.body) == 1
    sec = doc.body[0]
    assert isinstance(sec, Section)
    assert sec.level == 1
    assert [t.value for t in sec.title if isinstance(t, Text)] == ["Intro"]
    assert para_text(sec.children[0]) == "Hello."


def test_itemize_to_list():
    doc = doc_of(r"\begin{itemize}\item a\item b\end{itemize}")
    lst = doc.body[0]
    assert isinstance(lst, ListNode)
    assert not lst.ordered
    assert [para_text(item[0]) for item in lst.items] == ["a", "b"]


def test_enumerate_is_ordered():
    doc = doc_of(r"\begin{enumerate}\item a\end{enumerate}")
    assert doc.body[0].ordered


def test_empty_input_empty_document():
    doc = doc_of("")
    assert doc.body == []
    assert doc.diagnostics == []


def test_environment_mismatch_recovered():
    doc = doc_of(r"\begin{itemize} \item x \end{enumerate}")
    assert isinstance(doc.body[0], ListNode)
    assert any(d.code == "environment-mismatch" and d.severity == Severity.ERROR
               for d in doc.diagnostics)


def test_unterminated_environment_force_closed():
    doc = doc_of(r"\begin{quote}abc")
    assert isinstance(doc.body[0], Quote)
    assert any(d.code == "unterminated-environment" and d.severity == Severity.ERROR
               for d in doc.diagnostics)


def test_section_nesting_never_skips_levels():
    doc = doc_of(r"\section{A}\subsubsection{B}")
    sec = doc.body[0]
    assert sec.level == 1
    child = sec.children[0]
    assert isinstance(child, Section)
    assert child.level == 2  # clamped from 3
    assert any(d.code == "section-level-clamped" for d in doc.diagnostics)


def test_chapter_demoted_with_diagnostic():
    doc = doc_of(r"\chapter{X}")
    assert doc.body[0].level == 1
    assert any(d.code == "unsupported-sectioning" for d in doc.diagnostics)


def test_math_inline_and_display():
    doc = doc_of(r"$x+y$ and \[a=b\]")
    para = doc.body[0]
    maths = [i for i in para.inlines if isinstance(i, MathInline)]
    assert maths[0].tex == "x+y"
    display = doc.body[1]
    assert isinstance(display, MathDisplay)
    assert display.tex == "a=b"


def test_equation_environment_with_label():
    doc = doc_of(r"\begin{equation}\label{eq:e} a=b \end{equation}")
    eq = doc.body[0]
    assert isinstance(eq, MathDisplay)
    assert eq.label == "eq:e"
    assert "a=b" == eq.tex.replace(" ", "")


def test_verbatim_fidelity():
    body = "x  +  y\n\tindented\n  spaced"
    doc = doc_of("\\begin{verbatim}\n" + body + "\n\\end{verbatim}")
    verb = doc.body[0]
    assert isinstance(verb, Verbatim)
    assert verb.raw == body


def test_unknown_environment_captured_whole():
    doc = doc_of(r"\begin{tikzpicture}\draw (0,0); \end{tikzpicture}")
    env = doc.body[0]
    assert isinstance(env, UnknownEnvironment)
    assert env.name == "tikzpicture"
    assert "\\draw" in env.raw_body
    assert any(d.code == "unknown-environment" for d in doc.diagnostics)


def test_unknown_command_keeps_raw_text():
    doc = doc_of(r"before \weird{x}{y} after")
    para = doc.body[0]
    unknown = [i for i in para.inlines if isinstance(i, UnknownCommand)]
    assert unknown[0].raw == r"\weird{x}{y}"


def test_usepackage_routed_to_registry():
    doc = doc_of(r"\usepackage{graphicx}\usepackage{tikz}")
    assert doc.unknown_packages == {"tikz"}


def test_figure_with_caption_and_alt():
    doc = doc_of(
        r"\begin{figure}\includegraphics[width=5cm,alt=a graph]{plot.png}"
        r"\caption{The graph}\label{fig:g}\end{figure}")
    fig = doc.body[0]
    assert isinstance(fig, Figure)
    assert fig.graphic_path == "plot.png"
    assert fig.alt_text == "a graph"
    assert fig.label == "fig:g"


def test_figure_alt_falls_back_to_caption():
    doc = doc_of(r"\begin{figure}\includegraphics{p.png}\caption{A plot}\end{figure}")
    assert doc.body[0].alt_text == "A plot"


def test_figure_missing_alt_diagnosed():
    doc = doc_of(r"\begin{figure}\includegraphics{p.png}\end{figure}")
    assert doc.body[0].alt_text is None
    assert any(d.code == "missing-alt-text" for d in doc.diagnostics)


def test_tabular_rows_and_cells():
    doc = doc_of(r"\begin{tabular}{ll} a & b \\ c & d \end{tabular}")
    table = doc.body[0]
    assert isinstance(table, Table)
    assert len(table.rows) == 2
    assert len(table.rows[0]) == 2


def test_multicolumn_collapsed():
    doc = doc_of(r"\begin{tabular}{ll}\multicolumn{2}{c}{wide} \\ a & b \end{tabular}")
    assert any(d.code == "multicolumn-collapsed" for d in doc.diagnostics)


def test_duplicate_label_first_wins():
    doc = doc_of(r"\section{A}\label{s}\section{B}\label{s}")
    doc = resolve_refs(doc)
    assert doc.labels["s"] is doc.body[0]
    assert any(d.code == "duplicate-label" for d in doc.diagnostics)


def test_title_and_author_metadata():
    doc = doc_of(r"\title{My Paper}\author{Me}\maketitle")
    assert [t.value for t in doc.title if isinstance(t, Text)] == ["My Paper"]
    assert [t.value for t in doc.author if isinstance(t, Text)] == ["Me"]


def test_abstract_captured():
    doc = doc_of(r"\begin{abstract}Short summary.\end{abstract}")
    assert doc.abstract is not None
    assert para_text(doc.abstract[0]) == "Short summary."


def test_setcounter_ignored_with_diagnostic():
    doc = doc_of(r"\setcounter{section}{5}\section{A}")
    doc = resolve_refs(doc)
    assert doc.body[0].number == "1"
    assert any(d.code == "setcounter-ignored" for d in doc.diagnostics)


# ------------------------------------------------------------- resolve_refs

def test_ref_resolved_by_document_order():
    doc = doc_of(r"\section{A}\label{sec:a} See \ref{sec:a}.")
    doc = resolve_refs(doc)
    refs = [i for i in doc.body[0].children[0].inlines if isinstance(i, Ref)]
    assert refs[0].resolved == "1"


def test_hierarchical_section_numbers():
    doc = doc_of(r"\section{A}\subsection{B}\subsection{C}\section{D}")
    doc = resolve_refs(doc)
    assert doc.body[0].number == "1"
    assert doc.body[0].children[0].number == "1.1"
    assert doc.body[0].children[1].number == "1.2"
    assert doc.body[1].number == "2"


def test_unresolved_ref_gets_question_marks():
    doc = resolve_refs(doc_of(r"See \ref{missing}."))
    refs = [i for i in doc.body[0].inlines if isinstance(i, Ref)]
    assert refs[0].resolved == "??"
    assert any(d.code == "unresolved-ref" for d in doc.diagnostics)


def test_resolve_refs_identity_without_refs():
    doc = doc_of(r"\section{A} text")
    before = document_to_dict(doc)
    after = document_to_dict(resolve_refs(doc))
    before["body"][0]["number"] = "1"  # numbering is the only change
    assert before == after


def test_figure_numbering_in_document_order():
    doc = doc_of(
        r"\begin{figure}\includegraphics[alt=x]{a.png}\label{f:a}\end{figure}"
        r"\begin{figure}\includegraphics[alt=y]{b.png}\label{f:b}\end{figure}"
        r"\ref{f:b}")
    doc = resolve_refs(doc)
    refs = [i for i in doc.body[2].inlines if isinstance(i, Ref)]
    assert refs[0].resolved == "2"


# ---------------------------------------------------------------- properties

_sections = st.lists(st.integers(min_value=1, max_value=4), max_size=12)


@given(_sections)
@settings(max_examples=150)
def test_structure_conservation(levels):
    names = {1: "section", 2: "subsection", 3: "subsubsection", 4: "paragraph"}
    source = "".join(f"\\{names[l]}{{T{i}}} body{i}. " for i, l in enumerate(levels))
    doc = doc_of(source)

    count = 0

    def walk(nodes):
        nonlocal count
        for n in nodes:
            if isinstance(n, Section):
                count += 1
                walk(n.children)

    walk(doc.body)
    assert count == len(levels)


@given(st.text(max_size=300))
@settings(max_examples=200)
def test_recovery_totality(source):
    tokens, _ = tokenize(source)
    doc = parse(tokens, PackageRegistry())
    assert isinstance(doc, Document)


@given(st.text(alphabet=string.ascii_letters + "\\{}$%#^_& \n", max_size=200))
@settings(max_examples=200)
def test_determinism(source):
    tokens, _ = tokenize(source)
    a = document_to_dict(parse(tokens, PackageRegistry()))
    b = document_to_dict(parse(tokens, PackageRegistry()))
    assert a == b
