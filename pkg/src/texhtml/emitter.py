"""Project a Document into one self-contained accessible HTML page.

Mapping: title -> h1, section level n -> h(n+1) inside <section>,
paragraph -> p, list -> ul/ol, figure -> figure/figcaption, verbatim ->
pre. Unknown commands stay visible in the text; unknown packages raise a
banner at the top of the page. The stylesheet is embedded, has no fixed
page width, and contains exactly one dark-scheme media rule so reader
chrome can override colors cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape
from html.parser import HTMLParser
from typing import Optional

from .diagnostics import Diagnostic, warning
from . import docmodel as dm
from .mathrender import render_math

STAGE = "emitter"

UNKNOWN_PACKAGE_BANNER = (
    "This paper uses packages the converter does not recognize; "
    "parts of it may not render correctly: ")

_VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "source", "track", "wbr"})

_STYLESHEET = """\
:root { color-scheme: light dark; }
body {
  margin: 0 auto;
  max-width: 42em;
  padding: 0 1rem;
  font-family: Georgia, 'Times New Roman', serif;
  line-height: 1.6;
}
main { display: block; }
pre { overflow-x: auto; }
img { max-width: 100%; height: auto; }
table { border-collapse: collapse; }
td, th { border: 1px solid currentColor; padding: 0.25em 0.5em; }
figure { margin: 1em 0; text-align: center; }
blockquote { margin-left: 2em; font-style: italic; }
.experimental-label {
  font-variant: small-caps;
  letter-spacing: 0.05em;
  border: 1px solid currentColor;
  border-radius: 3px;
  padding: 0 0.4em;
}
.reader-header {
  display: flex;
  justify-content: space-between;
  align-items: center;
  padding: 0.5rem 0;
}
.unknown-package-banner {
  border: 2px solid currentColor;
  padding: 0.5rem 1rem;
  margin: 0.5rem 0;
  font-weight: bold;
}
.unknown-command, .unknown-environment {
  font-family: monospace;
  outline: 1px dotted currentColor;
}
.math-fallback { font-family: monospace; }
.math.display { display: block; text-align: center; margin: 1em 0; }
@media (prefers-color-scheme: dark) {
  :root { color-scheme: dark; }
}
"""


class EmitterFailure(Exception):
    """Raised only when rendering produced no usable page at all."""


@dataclass
class EmitOptions:
    paper_id: str = "untitled"
    language: str = "en"
    include_reader_chrome: Optional[str] = None  # script URL, if any


@dataclass
class HtmlArtifact:
    html: str
    warnings: list[Diagnostic] = field(default_factory=list)
    includes_banner: bool = False
    assets: list[tuple[str, str]] = field(default_factory=list)


def _inline_html(nodes: list[dm.Inline], warnings: list[Diagnostic]) -> str:
    parts: list[str] = []
    for node in nodes:
        if isinstance(node, dm.Text):
            parts.append(escape(node.value))
        elif isinstance(node, dm.MathInline):
            parts.append(_math_html(node.tex, display=False, warnings=warnings))
        elif isinstance(node, dm.Ref):
            label = escape(node.resolved or "??")
            parts.append(f'<a class="ref" href="#{escape(node.key, quote=True)}">{label}</a>')
        elif isinstance(node, dm.Cite):
            keys = escape(", ".join(node.keys))
            parts.append(f'<cite class="cite">[{keys}]</cite>')
        elif isinstance(node, dm.Link):
            url = escape(node.url, quote=True)
            parts.append(f'<a href="{url}">{_inline_html(node.text, warnings)}</a>')
        elif isinstance(node, dm.UnknownCommand):
            parts.append(f'<span class="unknown-command">{escape(node.raw)}</span>')
        elif isinstance(node, dm.Verbatim):
            parts.append(f"<code>{escape(node.raw)}</code>")
    return "".join(parts)


def _math_html(tex: str, display: bool, warnings: list[Diagnostic],
               number: Optional[str] = None, label: Optional[str] = None) -> str:
    mode = "display" if display else "inline"
    attr = f' data-tex="{escape(tex, quote=True)}"'
    anchor = f' id="{escape(label, quote=True)}"' if label else ""
    rendered = render_math(tex, display=display)
    if rendered is None:
        warnings.append(warning(STAGE, "math-fallback",
                                f"math outside the supported grammar: {tex!r}"))
        inner = f'<span class="math-fallback">{escape(tex)}</span>'
    else:
        inner = rendered
    num = f'<span class="eq-number">({escape(number)})</span>' if number else ""
    tag = "div" if display else "span"
    return f'<{tag} class="math {mode}"{attr}{anchor}>{inner}{num}</{tag}>'


def _block_html(node: dm.DocNode, warnings: list[Diagnostic],
                assets: list[tuple[str, str]]) -> str:
    if isinstance(node, dm.Section):
        hlevel = min(node.level + 1, 6)
        anchor = f' id="{escape(node.label, quote=True)}"' if node.label else ""
        num = f"{escape(node.number)} " if node.number else ""
        title = _inline_html(node.title, warnings)
        children = "".join(_block_html(c, warnings, assets) for c in node.children)
        return (f"<section{anchor}><h{hlevel}>{num}{title}</h{hlevel}>"
                f"{children}</section>")
    if isinstance(node, dm.Paragraph):
        return f"<p>{_inline_html(node.inlines, warnings)}</p>"
    if isinstance(node, dm.ListNode):
        tag = "ol" if node.ordered else "ul"
        items = "".join(
            "<li>" + "".join(_block_html(b, warnings, assets) for b in item) + "</li>"
            for item in node.items)
        return f"<{tag}>{items}</{tag}>"
    if isinstance(node, dm.Figure):
        anchor = f' id="{escape(node.label, quote=True)}"' if node.label else ""
        parts = [f"<figure{anchor}>"]
        if node.graphic_path:
            alt = escape(node.alt_text or "", quote=True)
            if not node.alt_text:
                warnings.append(warning(STAGE, "missing-alt-text",
                                        f"image {node.graphic_path} emitted with "
                                        "empty alt text"))
            src = escape(node.graphic_path, quote=True)
            parts.append(f'<img src="{src}" alt="{alt}">')
            assets.append((node.graphic_path, "graphic"))
        if node.caption is not None:
            num = f"Figure {escape(node.number)}: " if node.number else ""
            parts.append(f"<figcaption>{num}{_inline_html(node.caption, warnings)}"
                         "</figcaption>")
        parts.append("</figure>")
        return "".join(parts)
    if isinstance(node, dm.Table):
        anchor = f' id="{escape(node.label, quote=True)}"' if node.label else ""
        rows = "".join(
            "<tr>" + "".join(f"<td>{_inline_html(cell, warnings)}</td>" for cell in row)
            + "</tr>"
            for row in node.rows)
        caption = ""
        if node.caption is not None:
            num = f"Table {escape(node.number)}: " if node.number else ""
            caption = f"<caption>{num}{_inline_html(node.caption, warnings)}</caption>"
        return f"<table{anchor}>{caption}{rows}</table>"
    if isinstance(node, dm.MathDisplay):
        return _math_html(node.tex, display=True, warnings=warnings,
                          number=node.number, label=node.label)
    if isinstance(node, dm.MathInline):
        return f"<p>{_math_html(node.tex, display=False, warnings=warnings)}</p>"
    if isinstance(node, dm.Quote):
        inner = "".join(_block_html(c, warnings, assets) for c in node.children)
        return f"<blockquote>{inner}</blockquote>"
    if isinstance(node, dm.Verbatim):
        return f"<pre>{escape(node.raw)}</pre>"
    if isinstance(node, dm.UnknownCommand):
        return f'<p><span class="unknown-command">{escape(node.raw)}</span></p>'
    if isinstance(node, dm.UnknownEnvironment):
        name = escape(node.name)
        return (f'<div class="unknown-environment" data-environment="{name}">'
                f"<pre>{escape(node.raw_body)}</pre></div>")
    if isinstance(node, (dm.Ref, dm.Cite, dm.Link)):
        return f"<p>{_inline_html([node], warnings)}</p>"
    return ""


def emit(doc: dm.Document, options: Optional[EmitOptions] = None) -> HtmlArtifact:
    """Render a complete standalone page for `doc`."""
    options = options or EmitOptions()
    warnings: list[Diagnostic] = []
    assets: list[tuple[str, str]] = []

    includes_banner = bool(doc.unknown_packages)
    body_parts: list[str] = []
    if includes_banner:
        pkgs = escape(", ".join(sorted(doc.unknown_packages)))
        body_parts.append(
            f'<div class="unknown-package-banner" role="note">'
            f"{escape(UNKNOWN_PACKAGE_BANNER)}{pkgs}</div>")
    body_parts.append(
        '<header class="reader-header">'
        '<span class="experimental-label">Experimental</span>'
        '<button type="button" class="report-issue" data-role="report-issue">'
        "Report Issue</button></header>")

    title_html = _inline_html(doc.title, warnings)
    if title_html:
        body_parts.append(f"<h1>{title_html}</h1>")
    author_html = _inline_html(doc.author, warnings)
    if author_html:
        body_parts.append(f'<p class="authors">{author_html}</p>')

    main_parts: list[str] = []
    if doc.abstract:
        abstract = "".join(_block_html(b, warnings, assets) for b in doc.abstract)
        main_parts.append(f'<section class="abstract"><h2>Abstract</h2>'
                          f"{abstract}</section>")
    try:
        for node in doc.body:
            main_parts.append(_block_html(node, warnings, assets))
    except RecursionError as exc:
        raise EmitterFailure(f"document too deeply nested: {exc}") from exc
    body_parts.append("<main>" + "".join(main_parts) + "</main>")

    script = ""
    if options.include_reader_chrome:
        url = escape(options.include_reader_chrome, quote=True)
        script = f'<script src="{url}" defer></script>'

    page_title = title_html or escape(options.paper_id)
    html = (
        "<!DOCTYPE html>\n"
        f'<html lang="{escape(options.language, quote=True)}" '
        f'data-paper-id="{escape(options.paper_id, quote=True)}">\n'
        "<head>\n"
        '<meta charset="utf-8">\n'
        '<meta name="viewport" content="width=device-width, initial-scale=1">\n'
        f"<title>{page_title}</title>\n"
        f"<style>\n{_STYLESHEET}</style>\n"
        f"{script}"
        "</head>\n"
        "<body>\n"
        + "\n".join(body_parts)
        + "\n</body>\n</html>\n"
    )
    return HtmlArtifact(html=html, warnings=warnings,
                        includes_banner=includes_banner, assets=assets)


# ------------------------------------------------------- validity checking

class _BalanceChecker(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.stack: list[str] = []
        self.problems: list[str] = []
        self.roots = 0

    def handle_starttag(self, tag, attrs):
        if tag in _VOID_ELEMENTS:
            return
        if not self.stack:
            self.roots += 1
        self.stack.append(tag)

    def handle_endtag(self, tag):
        if tag in _VOID_ELEMENTS:
            return
        if not self.stack:
            self.problems.append(f"closing </{tag}> with no open element")
            return
        if self.stack[-1] != tag:
            self.problems.append(
                f"closing </{tag}> but <{self.stack[-1]}> is open")
            return
        self.stack.pop()


def check_well_formed(html: str) -> list[str]:
    """Structural validity: balanced and properly nested tags, single root."""
    checker = _BalanceChecker()
    checker.feed(html)
    checker.close()
    problems = list(checker.problems)
    if checker.stack:
        problems.append(f"unclosed elements: {checker.stack}")
    if checker.roots != 1:
        problems.append(f"expected one root element, found {checker.roots}")
    return problems
