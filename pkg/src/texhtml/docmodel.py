"""Semantic document AST and the token-stream parser that builds it.

The parser is total: any token stream yields a Document. Structural
damage (mismatched environments, unterminated groups) is repaired with
error-severity diagnostics instead of aborting, so a glitchy paper still
produces a readable page.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .diagnostics import Diagnostic, error, info, warning
from .lexer import Catcode, Char, ControlSeq, Param, ParBreak, Token, detokenize
from .packages import PackageRegistry, IGNORED_SAFE

STAGE = "parser"


# ---------------------------------------------------------------- AST nodes

@dataclass
class Text:
    value: str


@dataclass
class MathInline:
    tex: str


@dataclass
class Ref:
    key: str
    resolved: Optional[str] = None


@dataclass
class Cite:
    keys: list[str]


@dataclass
class Link:
    url: str
    text: list["Inline"]


@dataclass
class UnknownCommand:
    raw: str


@dataclass
class Verbatim:
    raw: str
    inline: bool = False


Inline = Union[Text, MathInline, Ref, Cite, Link, UnknownCommand, Verbatim]


@dataclass
class Paragraph:
    inlines: list[Inline]


@dataclass
class Section:
    level: int  # 1..4
    title: list[Inline]
    children: list["DocNode"] = field(default_factory=list)
    label: Optional[str] = None
    number: Optional[str] = None


@dataclass
class ListNode:
    ordered: bool
    items: list[list["DocNode"]]


@dataclass
class Figure:
    graphic_path: Optional[str] = None
    alt_text: Optional[str] = None
    caption: Optional[list[Inline]] = None
    label: Optional[str] = None
    number: Optional[str] = None


@dataclass
class Table:
    rows: list[list[list[Inline]]]
    caption: Optional[list[Inline]] = None
    label: Optional[str] = None
    number: Optional[str] = None


@dataclass
class MathDisplay:
    tex: str
    label: Optional[str] = None
    number: Optional[str] = None


@dataclass
class Quote:
    children: list["DocNode"]


@dataclass
class UnknownEnvironment:
    name: str
    raw_body: str


DocNode = Union[Section, Paragraph, ListNode, Figure, Table, MathInline,
                MathDisplay, Quote, Verbatim, UnknownCommand,
                UnknownEnvironment, Ref, Cite, Link]


@dataclass
class Document:
    title: list[Inline] = field(default_factory=list)
    author: list[Inline] = field(default_factory=list)
    abstract: Optional[list[DocNode]] = None
    body: list[DocNode] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    unknown_packages: set[str] = field(default_factory=set)
    labels: dict[str, Any] = field(default_factory=dict)


_SECTION_LEVELS = {"section": 1, "subsection": 2, "subsubsection": 3, "paragraph": 4}
_LEGACY_SECTIONS = {"chapter", "part"}  # article subset: demoted to level 1
_MATH_ENVS = {"equation", "equation*", "align", "align*", "gather", "gather*",
              "displaymath", "eqnarray", "eqnarray*", "math"}
_LIST_ENVS = {"itemize": False, "enumerate": True}
_TRANSPARENT_ENVS = {"document", "center", "flushleft", "flushright", "centering"}
_QUOTE_ENVS = {"quote", "quotation"}


def _is_cat(tok: Token, cat: Catcode) -> bool:
    return isinstance(tok, Char) and tok.category == cat


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def eof(self) -> bool:
        return self.i >= len(self.toks)

    def peek(self) -> Optional[Token]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def skip_spaces(self) -> None:
        while not self.eof() and (_is_cat(self.peek(), Catcode.SPACE)):
            self.i += 1

    def group(self) -> tuple[list[Token], bool]:
        """Consume a balanced {...}; returns (content, closed)."""
        assert _is_cat(self.peek(), Catcode.BEGIN_GROUP)
        self.next()
        depth = 1
        out: list[Token] = []
        while not self.eof():
            tok = self.next()
            if _is_cat(tok, Catcode.BEGIN_GROUP):
                depth += 1
            elif _is_cat(tok, Catcode.END_GROUP):
                depth -= 1
                if depth == 0:
                    return out, True
            out.append(tok)
        return out, False

    def optional_group(self) -> Optional[list[Token]]:
        """Consume {...} after optional spaces, if present."""
        save = self.i
        self.skip_spaces()
        if not self.eof() and _is_cat(self.peek(), Catcode.BEGIN_GROUP):
            content, _ = self.group()
            return content
        self.i = save
        return None

    def bracket_group(self) -> Optional[list[Token]]:
        """Consume [...] after optional spaces, if present."""
        save = self.i
        self.skip_spaces()
        if self.eof() or not (isinstance(self.peek(), Char) and self.peek().value == "["):
            self.i = save
            return None
        self.next()
        out: list[Token] = []
        depth = 0
        while not self.eof():
            tok = self.next()
            if _is_cat(tok, Catcode.BEGIN_GROUP):
                depth += 1
            elif _is_cat(tok, Catcode.END_GROUP):
                depth -= 1
            elif isinstance(tok, Char) and tok.value == "]" and depth == 0:
                return out
            out.append(tok)
        return out

    def star(self) -> bool:
        if not self.eof() and isinstance(self.peek(), Char) and self.peek().value == "*":
            self.next()
            return True
        return False


def _plain_text(tokens: list[Token]) -> str:
    return "".join(t.value for t in tokens if isinstance(t, Char)).strip()


class _Parser:
    def __init__(self, tokens: list[Token], registry: PackageRegistry):
        self.c = _Cursor(tokens)
        self.registry = registry
        self.doc = Document()
        self.env_stack: list[str] = []
        self.finished = False  # set by \end{document}

    # -- diagnostics helpers
    def diag(self, d: Diagnostic) -> None:
        self.doc.diagnostics.append(d)

    def record_label(self, key: str, node: Any) -> None:
        if key in self.doc.labels:
            self.diag(warning(STAGE, "duplicate-label",
                              f"label {key!r} defined more than once; first wins"))
            return
        self.doc.labels[key] = node

    # -- inline parsing -----------------------------------------------------
    def parse_inlines(self, tokens: list[Token]) -> list[Inline]:
        sub = _Parser(tokens, self.registry)
        blocks = sub.parse_blocks(env=None)
        self.doc.diagnostics.extend(sub.doc.diagnostics)
        self.doc.unknown_packages |= sub.doc.unknown_packages
        for key, node in sub.doc.labels.items():
            self.record_label(key, node)
        inlines: list[Inline] = []
        for b in blocks:
            if isinstance(b, Paragraph):
                if inlines:
                    inlines.append(Text(" "))
                inlines.extend(b.inlines)
            elif isinstance(b, (Text, MathInline, Ref, Cite, Link,
                                UnknownCommand, Verbatim)):
                inlines.append(b)  # type: ignore[arg-type]
        return inlines

    # -- block parsing ------------------------------------------------------
    def parse_blocks(self, env: Optional[str]) -> list[DocNode]:
        """Parse until \\end{env} (or end of input when env is None)."""
        blocks: list[DocNode] = []
        inlines: list[Inline] = []
        text_buf: list[str] = []

        def flush_text() -> None:
            if text_buf:
                inlines.append(Text("".join(text_buf)))
                text_buf.clear()

        def flush_para() -> None:
            flush_text()
            while inlines and isinstance(inlines[-1], Text) and not inlines[-1].value.strip():
                inlines.pop()
            if inlines and isinstance(inlines[0], Text):
                inlines[0].value = inlines[0].value.lstrip()
                if not inlines[0].value:
                    inlines.pop(0)
            if inlines:
                blocks.append(Paragraph(list(inlines)))
                inlines.clear()

        def add_inline(node: Inline) -> None:
            flush_text()
            inlines.append(node)

        c = self.c
        while not c.eof() and not self.finished:
            tok = c.next()

            if isinstance(tok, ParBreak):
                flush_para()
                continue

            if isinstance(tok, Param):
                self.diag(info(STAGE, "stray-parameter",
                               f"parameter #{tok.index} outside a definition",
                               tok.line, tok.column))
                text_buf.append(f"#{tok.index}")
                continue

            if isinstance(tok, Char):
                if tok.category == Catcode.MATH_SHIFT:
                    node = self.parse_inline_math(tok)
                    if isinstance(node, MathInline):
                        add_inline(node)
                    elif node is not None:
                        flush_para()
                        blocks.append(node)
                    continue
                if tok.category in (Catcode.BEGIN_GROUP, Catcode.END_GROUP):
                    # grouping is transparent at the document level
                    continue
                if tok.category == Catcode.ALIGNMENT:
                    text_buf.append(tok.value)
                    continue
                if tok.value == "~":
                    text_buf.append(" ")
                    continue
                text_buf.append(tok.value)
                continue

            assert isinstance(tok, ControlSeq)
            name = tok.name

            # --- structure boundaries
            if name == "begin":
                env_name = _plain_text(c.optional_group() or [])
                if not env_name:
                    self.diag(error(STAGE, "malformed-begin",
                                    "\\begin without environment name",
                                    tok.line, tok.column))
                    continue
                flush_para()
                blocks.extend(self.parse_environment(env_name, tok))
                continue
            if name == "end":
                end_idx = c.i - 1
                env_name = _plain_text(c.optional_group() or [])
                if env is not None and env_name == env:
                    flush_para()
                    return blocks
                self.diag(error(STAGE, "environment-mismatch",
                                f"\\end{{{env_name}}} does not match open "
                                f"environment {env or '(none)'}; recovered",
                                tok.line, tok.column))
                if env_name == "document":
                    self.finished = True
                    break
                if env is not None and env_name in self.env_stack:
                    # closes an outer environment: close this one and unread
                    c.i = end_idx
                    flush_para()
                    return blocks
                continue

            # --- sectioning
            if name in _SECTION_LEVELS or name in _LEGACY_SECTIONS:
                c.star()
                level = _SECTION_LEVELS.get(name, 1)
                if name in _LEGACY_SECTIONS:
                    self.diag(warning(STAGE, "unsupported-sectioning",
                                      f"\\{name} treated as level-1 section",
                                      tok.line, tok.column))
                title_toks = c.optional_group()
                if title_toks is None:
                    self.diag(error(STAGE, "missing-section-title",
                                    f"\\{name} without a title",
                                    tok.line, tok.column))
                    title_toks = []
                flush_para()
                blocks.append(Section(level, self.parse_inlines(title_toks)))
                continue

            handled = self.parse_command(name, tok, add_inline, flush_para, blocks)
            if not handled:
                add_inline(self.unknown_command(name))

        if env is not None and not self.finished:
            self.diag(error(STAGE, "unterminated-environment",
                            f"environment {env} not closed before end of input"))
        flush_para()
        return blocks

    # -- single commands ----------------------------------------------------
    def parse_command(self, name: str, tok: ControlSeq, add_inline, flush_para,
                      blocks: list[DocNode]) -> bool:
        c = self.c
        if name == "documentclass":
            c.bracket_group()
            c.optional_group()
            return True
        if name == "usepackage":
            c.bracket_group()
            names = _plain_text(c.optional_group() or [])
            for pkg in (p.strip() for p in names.split(",") if p.strip()):
                handler = self.registry.resolve(pkg)
                if handler is None:
                    self.doc.unknown_packages.add(pkg)
                    self.diag(warning(STAGE, "unknown-package",
                                      f"package {pkg} is not supported; its commands "
                                      "will appear as raw text", tok.line, tok.column))
            return True
        if name in ("title", "author"):
            group = c.optional_group()
            inl = self.parse_inlines(group or [])
            if name == "title":
                self.doc.title = inl
            else:
                self.doc.author = inl
            return True
        if name in ("maketitle", "date"):
            if name == "date":
                c.optional_group()
            return True
        if name == "setcounter":
            c.optional_group()
            c.optional_group()
            self.diag(info(STAGE, "setcounter-ignored",
                           "\\setcounter has no effect on HTML numbering",
                           tok.line, tok.column))
            return True
        if name == "label":
            key = _plain_text(c.optional_group() or [])
            target: Any = None
            for b in reversed(blocks):
                if isinstance(b, (Section, Figure, Table, MathDisplay)):
                    target = b
                    break
            if target is not None and getattr(target, "label", None) is None:
                target.label = key
            if key:
                self.record_label(key, target)
            return True
        if name == "ref" or name == "pageref":
            key = _plain_text(c.optional_group() or [])
            add_inline(Ref(key))
            return True
        if name == "cite":
            c.bracket_group()
            keys = _plain_text(c.optional_group() or [])
            add_inline(Cite([k.strip() for k in keys.split(",") if k.strip()]))
            return True
        if name == "url":
            url = _plain_text(c.optional_group() or [])
            add_inline(Link(url, [Text(url)]))
            return True
        if name == "href":
            url = _plain_text(c.optional_group() or [])
            text = self.parse_inlines(c.optional_group() or [])
            add_inline(Link(url, text or [Text(url)]))
            return True
        if name == "includegraphics":
            fig = self.parse_includegraphics(tok)
            flush_para()
            blocks.append(fig)
            return True
        if name in ("caption",):
            # caption outside figure/table context: keep it as a paragraph
            inl = self.parse_inlines(c.optional_group() or [])
            flush_para()
            blocks.append(Paragraph(inl))
            return True
        if name == "footnote" or name == "thanks":
            inl = self.parse_inlines(c.optional_group() or [])
            add_inline(Text(" ("))
            for n in inl:
                add_inline(n)
            add_inline(Text(") "))
            return True
        if name == "verb":
            raw = self.read_verb()
            add_inline(Verbatim(raw, inline=True))
            return True
        if name == "par":
            flush_para()
            return True
        if name == "\\":
            add_inline(Text(" "))
            return True
        if name == "[":
            node = self.parse_display_math_bracket(tok)
            flush_para()
            blocks.append(node)
            return True
        if name == "]":
            self.diag(error(STAGE, "stray-math-close", "\\] without matching \\[",
                            tok.line, tok.column))
            return True
        if name == "item":
            self.diag(warning(STAGE, "item-outside-list",
                              "\\item outside a list environment",
                              tok.line, tok.column))
            c.bracket_group()
            return True
        if name == "catcode":
            return True  # already diagnosed by the lexer
        return False

    def unknown_command(self, name: str) -> UnknownCommand:
        """Raw text of the command plus any immediately following groups."""
        c = self.c
        raw = ["\\" + name]
        while not c.eof() and _is_cat(c.peek(), Catcode.BEGIN_GROUP):
            content, closed = c.group()
            raw.append("{" + detokenize(content) + ("}" if closed else ""))
        return UnknownCommand("".join(raw))

    def read_verb(self) -> str:
        c = self.c
        if c.eof() or not isinstance(c.peek(), Char):
            return ""
        delim = c.next().value
        out: list[str] = []
        while not c.eof():
            tok = c.next()
            if isinstance(tok, Char):
                if tok.value == delim:
                    break
                out.append(tok.value)
        return "".join(out)

    # -- math -----------------------------------------------------------
    def parse_inline_math(self, opener: Char) -> Optional[Union[MathInline, MathDisplay]]:
        c = self.c
        display = False
        if not c.eof() and _is_cat(c.peek(), Catcode.MATH_SHIFT):
            c.next()
            display = True
        content: list[Token] = []
        closed = False
        while not c.eof():
            tok = c.next()
            if _is_cat(tok, Catcode.MATH_SHIFT):
                if display and not c.eof() and _is_cat(c.peek(), Catcode.MATH_SHIFT):
                    c.next()
                closed = True
                break
            content.append(tok)
        if not closed:
            self.diag(error(STAGE, "unterminated-math",
                            "math not closed before end of input",
                            opener.line, opener.column))
        tex = detokenize(content).strip()
        if display and not tex and not closed:
            return None
        return MathDisplay(tex) if display else MathInline(tex)

    def parse_display_math_bracket(self, opener: ControlSeq) -> MathDisplay:
        c = self.c
        content: list[Token] = []
        closed = False
        while not c.eof():
            tok = c.next()
            if isinstance(tok, ControlSeq) and tok.name == "]":
                closed = True
                break
            content.append(tok)
        if not closed:
            self.diag(error(STAGE, "unterminated-math",
                            "\\[ not closed before end of input",
                            opener.line, opener.column))
        return MathDisplay(detokenize(content).strip())

    # -- environments -----------------------------------------------------
    def parse_environment(self, name: str, opener: ControlSeq) -> list[DocNode]:
        """Blocks produced by \\begin{name}...\\end{name}. Transparent
        environments splice their content into the surrounding flow."""
        c = self.c
        if name in _TRANSPARENT_ENVS:
            self.env_stack.append(name)
            blocks = self.parse_blocks(env=name)
            self.env_stack.pop()
            if name == "document":
                self.finished = True
            return blocks
        if name in _LIST_ENVS:
            c.bracket_group()
            return [self.parse_list(name, _LIST_ENVS[name])]
        if name in _QUOTE_ENVS:
            self.env_stack.append(name)
            blocks = self.parse_blocks(env=name)
            self.env_stack.pop()
            return [Quote(blocks)]
        if name == "abstract":
            self.env_stack.append(name)
            blocks = self.parse_blocks(env=name)
            self.env_stack.pop()
            self.doc.abstract = blocks
            return []
        if name == "verbatim":
            return [self.parse_verbatim()]
        if name in _MATH_ENVS:
            return [self.parse_math_environment(name)]
        if name in ("figure", "figure*"):
            return [self.parse_figure(name)]
        if name in ("table", "table*"):
            return [self.parse_table_outer(name)]
        if name == "tabular":
            c.optional_group()  # column spec
            return [self.parse_tabular("tabular")]
        if name == "thebibliography":
            c.optional_group()
            return [self.parse_bibliography()]
        # unknown environment: capture the raw body whole
        return [self.parse_unknown_environment(name, opener)]

    def parse_list(self, env_name: str, ordered: bool) -> ListNode:
        c = self.c
        self.env_stack.append(env_name)
        items: list[list[DocNode]] = []
        # tokens before the first \item are skipped (whitespace normally)
        depth_guard = 0
        while not c.eof():
            tok = c.peek()
            if isinstance(tok, ControlSeq) and tok.name == "item":
                c.next()
                c.bracket_group()
                item_blocks = self.parse_item_body(env_name)
                items.append(item_blocks)
                # parse_item_body stops right before \item or \end{env}
                nxt = c.peek()
                if isinstance(nxt, ControlSeq) and nxt.name == "item":
                    continue
                break
            if isinstance(tok, ControlSeq) and tok.name == "end":
                save = c.i
                c.next()
                env_name2 = _plain_text(c.optional_group() or [])
                if env_name2 != env_name:
                    self.diag(error(STAGE, "environment-mismatch",
                                    f"\\end{{{env_name2}}} closes {env_name}; recovered",
                                    tok.line, tok.column))
                break
            if isinstance(tok, (ParBreak,)) or _is_cat(tok, Catcode.SPACE):
                c.next()
                continue
            # stray content before \item
            c.next()
            depth_guard += 1
            if depth_guard > 100000:
                break
        self.env_stack.pop()
        return ListNode(ordered, items)

    def parse_item_body(self, env_name: str) -> list[DocNode]:
        """Blocks of one \\item, stopping before the next \\item or at the
        list's \\end (which is consumed)."""
        c = self.c
        start = c.i
        depth = 0
        end = c.i
        consumed_end = False
        while not c.eof():
            tok = c.toks[c.i]
            if isinstance(tok, ControlSeq) and tok.name == "begin":
                depth += 1
                c.i += 1
                continue
            if isinstance(tok, ControlSeq) and tok.name == "end":
                if depth > 0:
                    depth -= 1
                    c.i += 1
                    continue
                end = c.i
                # consume \end{...}
                c.i += 1
                got = _plain_text(c.optional_group() or [])
                if got != env_name:
                    self.diag(error(STAGE, "environment-mismatch",
                                    f"\\end{{{got}}} closes {env_name}; recovered"))
                consumed_end = True
                break
            if isinstance(tok, ControlSeq) and tok.name == "item" and depth == 0:
                end = c.i
                break
            c.i += 1
        else:
            end = c.i
            self.diag(error(STAGE, "unterminated-environment",
                            f"environment {env_name} not closed before end of input"))
        body = c.toks[start:end]
        sub = _Parser(body, self.registry)
        blocks = sub.parse_blocks(env=None)
        self.merge_sub(sub)
        if consumed_end:
            # signal outer loop to stop by leaving cursor after \end group
            pass
        return blocks

    def merge_sub(self, sub: "_Parser") -> None:
        self.doc.diagnostics.extend(sub.doc.diagnostics)
        self.doc.unknown_packages |= sub.doc.unknown_packages
        for key, node in sub.doc.labels.items():
            self.record_label(key, node)

    def parse_verbatim(self) -> Verbatim:
        c = self.c
        out: list[str] = []
        while not c.eof():
            tok = c.peek()
            if isinstance(tok, ControlSeq) and tok.name == "end":
                save = c.i
                c.next()
                got = _plain_text(c.optional_group() or [])
                if got == "verbatim":
                    break
                c.i = save + 1
                out.append("\\end")
                continue
            c.next()
            if isinstance(tok, Char):
                out.append(tok.value)
            elif isinstance(tok, ParBreak):
                out.append("\n\n")
        raw = "".join(out)
        if raw.endswith("\n"):
            raw = raw[:-1]
        return Verbatim(raw)

    def parse_math_environment(self, name: str) -> MathDisplay:
        c = self.c
        content: list[Token] = []
        label: Optional[str] = None
        closed = False
        depth = 0
        while not c.eof():
            tok = c.next()
            if isinstance(tok, ControlSeq) and tok.name == "begin":
                depth += 1
            elif isinstance(tok, ControlSeq) and tok.name == "end":
                if depth == 0:
                    got = _plain_text(c.optional_group() or [])
                    if got != name:
                        self.diag(error(STAGE, "environment-mismatch",
                                        f"\\end{{{got}}} closes {name}; recovered",
                                        tok.line, tok.column))
                    closed = True
                    break
                depth -= 1
            elif isinstance(tok, ControlSeq) and tok.name == "label" and depth == 0:
                label = _plain_text(c.optional_group() or [])
                continue
            content.append(tok)
        if not closed:
            self.diag(error(STAGE, "unterminated-environment",
                            f"environment {name} not closed before end of input"))
        node = MathDisplay(detokenize(content).strip(), label=label)
        if label:
            self.record_label(label, node)
        return node

    def parse_figure(self, env_name: str) -> Figure:
        c = self.c
        c.bracket_group()  # float placement
        fig = Figure()
        self.env_stack.append(env_name)
        while not c.eof():
            tok = c.next()
            if isinstance(tok, ControlSeq):
                if tok.name == "end":
                    got = _plain_text(c.optional_group() or [])
                    if got != env_name:
                        self.diag(error(STAGE, "environment-mismatch",
                                        f"\\end{{{got}}} closes {env_name}; recovered",
                                        tok.line, tok.column))
                    break
                if tok.name == "includegraphics":
                    parsed = self.parse_includegraphics(tok, standalone=False)
                    fig.graphic_path = parsed.graphic_path
                    if parsed.alt_text:
                        fig.alt_text = parsed.alt_text
                    continue
                if tok.name == "caption":
                    fig.caption = self.parse_inlines(c.optional_group() or [])
                    continue
                if tok.name == "label":
                    key = _plain_text(c.optional_group() or [])
                    if fig.label is None:
                        fig.label = key
                    if key:
                        self.record_label(key, fig)
                    continue
                if tok.name == "begin":
                    got = _plain_text(c.optional_group() or [])
                    # nested centering-style envs inside figures are transparent
                    if got not in _TRANSPARENT_ENVS:
                        self.parse_unknown_environment(got, tok)
                    continue
        else:
            self.diag(error(STAGE, "unterminated-environment",
                            f"environment {env_name} not closed before end of input"))
        self.env_stack.pop()
        if fig.alt_text is None and fig.caption:
            fig.alt_text = "".join(
                t.value for t in fig.caption if isinstance(t, Text))
        if not fig.alt_text:
            self.diag(warning(STAGE, "missing-alt-text",
                              f"figure {fig.graphic_path or '(no graphic)'} has no "
                              "alt text or caption"))
        return fig

    def parse_includegraphics(self, tok: ControlSeq, standalone: bool = True) -> Figure:
        c = self.c
        opts = c.bracket_group() or []
        path = _plain_text(c.optional_group() or [])
        alt = None
        opt_text = detokenize(opts)
        for piece in opt_text.split(","):
            if "=" in piece:
                k, v = piece.split("=", 1)
                if k.strip() == "alt":
                    alt = v.strip()
        fig = Figure(graphic_path=path or None, alt_text=alt)
        if standalone and not alt:
            self.diag(warning(STAGE, "missing-alt-text",
                              f"graphic {path!r} has no alt text",
                              tok.line, tok.column))
        return fig

    def parse_table_outer(self, env_name: str) -> Table:
        c = self.c
        c.bracket_group()
        table = Table(rows=[])
        self.env_stack.append(env_name)
        while not c.eof():
            tok = c.next()
            if isinstance(tok, ControlSeq):
                if tok.name == "end":
                    got = _plain_text(c.optional_group() or [])
                    if got != env_name:
                        self.diag(error(STAGE, "environment-mismatch",
                                        f"\\end{{{got}}} closes {env_name}; recovered",
                                        tok.line, tok.column))
                    break
                if tok.name == "caption":
                    table.caption = self.parse_inlines(c.optional_group() or [])
                    continue
                if tok.name == "label":
                    key = _plain_text(c.optional_group() or [])
                    if table.label is None:
                        table.label = key
                    if key:
                        self.record_label(key, table)
                    continue
                if tok.name == "begin":
                    got = _plain_text(c.optional_group() or [])
                    if got == "tabular":
                        c.optional_group()
                        inner = self.parse_tabular("tabular")
                        table.rows = inner.rows
                    elif got not in _TRANSPARENT_ENVS:
                        self.parse_unknown_environment(got, tok)
                    continue
        else:
            self.diag(error(STAGE, "unterminated-environment",
                            f"environment {env_name} not closed before end of input"))
        self.env_stack.pop()
        return table

    def parse_tabular(self, env_name: str) -> Table:
        c = self.c
        rows: list[list[list[Inline]]] = []
        cell: list[Token] = []
        row: list[list[Token]] = []
        closed = False

        def end_cell() -> None:
            row.append(list(cell))
            cell.clear()

        def end_row() -> None:
            if cell or row:
                end_cell()
            if row and any(len(cl) > 0 for cl in row) or len(row) > 1:
                rows.append([self.parse_inlines(cl) for cl in row])
            row.clear()

        depth = 0
        while not c.eof():
            tok = c.next()
            if isinstance(tok, ControlSeq):
                if tok.name == "begin":
                    depth += 1
                    cell.append(tok)
                    continue
                if tok.name == "end":
                    if depth > 0:
                        depth -= 1
                        cell.append(tok)
                        continue
                    got = _plain_text(c.optional_group() or [])
                    if got != env_name:
                        self.diag(error(STAGE, "environment-mismatch",
                                        f"\\end{{{got}}} closes {env_name}; recovered",
                                        tok.line, tok.column))
                    closed = True
                    break
                if tok.name == "\\" and depth == 0:
                    end_row()
                    continue
                if tok.name == "hline" and depth == 0:
                    continue
                if tok.name == "multicolumn" and depth == 0:
                    c.optional_group()
                    c.optional_group()
                    content = c.optional_group() or []
                    self.diag(warning(STAGE, "multicolumn-collapsed",
                                      "\\multicolumn collapsed to a single cell",
                                      tok.line, tok.column))
                    cell.extend(content)
                    continue
                cell.append(tok)
                continue
            if _is_cat(tok, Catcode.ALIGNMENT) and depth == 0:
                end_cell()
                continue
            cell.append(tok)
        if not closed:
            self.diag(error(STAGE, "unterminated-environment",
                            f"environment {env_name} not closed before end of input"))
        end_row()
        return Table(rows=rows)

    def parse_bibliography(self) -> ListNode:
        """thebibliography reduced to an unordered list of entries."""
        c = self.c
        items: list[list[DocNode]] = []
        current: list[Token] = []
        closed = False

        def finish_item() -> None:
            if current:
                sub = _Parser(list(current), self.registry)
                items.append(sub.parse_blocks(env=None))
                self.merge_sub(sub)
                current.clear()

        while not c.eof():
            tok = c.next()
            if isinstance(tok, ControlSeq) and tok.name == "bibitem":
                finish_item()
                c.bracket_group()
                key = _plain_text(c.optional_group() or [])
                if key:
                    self.record_label(key, None)
                continue
            if isinstance(tok, ControlSeq) and tok.name == "end":
                got = _plain_text(c.optional_group() or [])
                if got != "thebibliography":
                    self.diag(error(STAGE, "environment-mismatch",
                                    f"\\end{{{got}}} closes thebibliography; recovered",
                                    tok.line, tok.column))
                closed = True
                break
            current.append(tok)
        finish_item()
        if not closed:
            self.diag(error(STAGE, "unterminated-environment",
                            "environment thebibliography not closed before end of input"))
        return ListNode(False, items)

    def parse_unknown_environment(self, name: str, opener: ControlSeq) -> UnknownEnvironment:
        c = self.c
        self.diag(warning(STAGE, "unknown-environment",
                          f"environment {name} is not supported; shown as raw source",
                          opener.line, opener.column))
        content: list[Token] = []
        depth = 0
        closed = False
        while not c.eof():
            tok = c.next()
            if isinstance(tok, ControlSeq) and tok.name == "begin":
                depth += 1
            elif isinstance(tok, ControlSeq) and tok.name == "end":
                save = c.i
                got = _plain_text(c.optional_group() or [])
                if depth == 0 and got == name:
                    closed = True
                    break
                if depth > 0:
                    depth -= 1
                content.append(tok)
                content.extend(c.toks[save:c.i])
                continue
            content.append(tok)
        if not closed:
            self.diag(error(STAGE, "unterminated-environment",
                            f"environment {name} not closed before end of input"))
        return UnknownEnvironment(name, detokenize(content).strip())


def parse(tokens: list[Token], registry: Optional[PackageRegistry] = None) -> Document:
    """Build a Document from an expanded token stream. Never raises."""
    registry = registry or PackageRegistry()
    p = _Parser(list(tokens), registry)
    blocks = p.parse_blocks(env=None)
    doc = p.doc
    doc.body = _nest_sections(blocks, doc.diagnostics)
    return doc


def _nest_sections(blocks: list[DocNode], diags: list[Diagnostic]) -> list[DocNode]:
    """Turn a flat block list into a section tree, clamping level jumps so
    nesting never skips downward by more than one."""
    root: list[DocNode] = []
    stack: list[Section] = []
    for node in blocks:
        if isinstance(node, Section):
            while stack and stack[-1].level >= node.level:
                stack.pop()
            max_level = (stack[-1].level + 1) if stack else 1
            if node.level > max_level:
                diags.append(warning(STAGE, "section-level-clamped",
                                     f"section level {node.level} clamped to "
                                     f"{max_level} to keep heading order"))
                node.level = max_level
            (stack[-1].children if stack else root).append(node)
            stack.append(node)
        else:
            (stack[-1].children if stack else root).append(node)
    return root


def resolve_refs(doc: Document) -> Document:
    """Assign section/figure/table/equation numbers in document order and
    annotate Ref nodes; unresolved references become '??' with a diagnostic."""
    counters = [0, 0, 0, 0]
    fig_count = 0
    table_count = 0
    eq_count = 0

    def walk(nodes: list[DocNode]) -> None:
        nonlocal fig_count, table_count, eq_count
        for node in nodes:
            if isinstance(node, Section):
                lvl = node.level - 1
                counters[lvl] += 1
                for i in range(lvl + 1, 4):
                    counters[i] = 0
                node.number = ".".join(str(c) for c in counters[:lvl + 1])
                walk(node.children)
            elif isinstance(node, Figure):
                fig_count += 1
                node.number = str(fig_count)
            elif isinstance(node, Table):
                table_count += 1
                node.number = str(table_count)
            elif isinstance(node, MathDisplay):
                if node.label is not None:
                    eq_count += 1
                    node.number = str(eq_count)
            elif isinstance(node, Quote):
                walk(node.children)
            elif isinstance(node, ListNode):
                for item in node.items:
                    walk(item)

    walk(doc.body)
    if doc.abstract:
        walk(doc.abstract)

    def resolve_inline(nodes: list) -> None:
        for n in nodes:
            if isinstance(n, Ref):
                target = doc.labels.get(n.key)
                number = getattr(target, "number", None) if target is not None else None
                if number is None:
                    n.resolved = "??"
                    doc.diagnostics.append(warning(
                        STAGE, "unresolved-ref", f"reference to unknown label {n.key!r}"))
                else:
                    n.resolved = number
            elif isinstance(n, Link):
                resolve_inline(n.text)

    def walk_refs(nodes: list[DocNode]) -> None:
        for node in nodes:
            if isinstance(node, Section):
                resolve_inline(node.title)
                walk_refs(node.children)
            elif isinstance(node, Paragraph):
                resolve_inline(node.inlines)
            elif isinstance(node, Quote):
                walk_refs(node.children)
            elif isinstance(node, ListNode):
                for item in node.items:
                    walk_refs(item)
            elif isinstance(node, Figure) and node.caption:
                resolve_inline(node.caption)
            elif isinstance(node, Table):
                if node.caption:
                    resolve_inline(node.caption)
                for row in node.rows:
                    for cl in row:
                        resolve_inline(cl)

    walk_refs(doc.body)
    if doc.abstract:
        walk_refs(doc.abstract)
    resolve_inline(doc.title)
    resolve_inline(doc.author)
    return doc


# ------------------------------------------------------------- debug dump

def document_to_dict(doc: Document) -> dict:
    """JSON-shaped debug dump with stable field names."""
    return {
        "title": [_node_dict(n) for n in doc.title],
        "author": [_node_dict(n) for n in doc.author],
        "abstract": [_node_dict(n) for n in doc.abstract] if doc.abstract else None,
        "body": [_node_dict(n) for n in doc.body],
        "unknownPackages": sorted(doc.unknown_packages),
        "diagnostics": [
            {"severity": d.severity.value, "stage": d.stage,
             "code": d.code, "message": d.message}
            for d in doc.diagnostics
        ],
    }


def _node_dict(node) -> dict:
    if isinstance(node, Text):
        return {"kind": "text", "value": node.value}
    if isinstance(node, MathInline):
        return {"kind": "mathInline", "tex": node.tex}
    if isinstance(node, MathDisplay):
        return {"kind": "mathDisplay", "tex": node.tex,
                "label": node.label, "number": node.number}
    if isinstance(node, Ref):
        return {"kind": "ref", "key": node.key, "resolved": node.resolved}
    if isinstance(node, Cite):
        return {"kind": "cite", "keys": node.keys}
    if isinstance(node, Link):
        return {"kind": "link", "url": node.url,
                "text": [_node_dict(n) for n in node.text]}
    if isinstance(node, UnknownCommand):
        return {"kind": "unknownCommand", "raw": node.raw}
    if isinstance(node, UnknownEnvironment):
        return {"kind": "unknownEnvironment", "name": node.name, "rawBody": node.raw_body}
    if isinstance(node, Verbatim):
        return {"kind": "verbatim", "raw": node.raw, "inline": node.inline}
    if isinstance(node, Paragraph):
        return {"kind": "paragraph", "inlines": [_node_dict(n) for n in node.inlines]}
    if isinstance(node, Section):
        return {"kind": "section", "level": node.level,
                "title": [_node_dict(n) for n in node.title],
                "label": node.label, "number": node.number,
                "children": [_node_dict(n) for n in node.children]}
    if isinstance(node, ListNode):
        return {"kind": "list", "ordered": node.ordered,
                "items": [[_node_dict(n) for n in item] for item in node.items]}
    if isinstance(node, Figure):
        return {"kind": "figure", "graphicPath": node.graphic_path,
                "altText": node.alt_text,
                "caption": [_node_dict(n) for n in node.caption] if node.caption else None,
                "label": node.label, "number": node.number}
    if isinstance(node, Table):
        return {"kind": "table",
                "rows": [[[_node_dict(n) for n in cell] for cell in row]
                         for row in node.rows],
                "caption": [_node_dict(n) for n in node.caption] if node.caption else None,
                "label": node.label, "number": node.number}
    if isinstance(node, Quote):
        return {"kind": "quote", "children": [_node_dict(n) for n in node.children]}
    return {"kind": "unknown", "repr": repr(node)}
