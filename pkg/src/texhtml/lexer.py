"""TeX tokenizer driven by a static category-code table.

The tokenizer is total: any decodable text yields a token stream plus
diagnostics, never an exception. Catcodes are fixed for the whole run;
mid-document \\catcode reassignment is reported and ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

from .diagnostics import Diagnostic, warning


class Catcode(Enum):
    ESCAPE = "escape"
    BEGIN_GROUP = "begin-group"
    END_GROUP = "end-group"
    MATH_SHIFT = "math-shift"
    ALIGNMENT = "alignment"
    PARAMETER = "parameter"
    SUPERSCRIPT = "superscript"
    SUBSCRIPT = "subscript"
    SPACE = "space"
    LETTER = "letter"
    OTHER = "other"
    COMMENT = "comment"


_DEFAULT_SPECIALS = {
    "\\": Catcode.ESCAPE,
    "{": Catcode.BEGIN_GROUP,
    "}": Catcode.END_GROUP,
    "$": Catcode.MATH_SHIFT,
    "&": Catcode.ALIGNMENT,
    "#": Catcode.PARAMETER,
    "^": Catcode.SUPERSCRIPT,
    "_": Catcode.SUBSCRIPT,
    " ": Catcode.SPACE,
    "\t": Catcode.SPACE,
    "%": Catcode.COMMENT,
}


@dataclass(frozen=True)
class CatcodeTable:
    """Character -> category mapping; characters absent from `overrides`
    fall back to letter (alphabetic) or other."""

    overrides: dict[str, Catcode] = field(default_factory=dict)

    def category(self, ch: str) -> Catcode:
        got = self.overrides.get(ch)
        if got is not None:
            return got
        return Catcode.LETTER if ch.isalpha() else Catcode.OTHER

    @classmethod
    def default(cls) -> "CatcodeTable":
        return cls(dict(_DEFAULT_SPECIALS))


@dataclass(frozen=True)
class Token:
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ControlSeq(Token):
    name: str = ""


@dataclass(frozen=True)
class Char(Token):
    value: str = ""
    category: Catcode = Catcode.OTHER


@dataclass(frozen=True)
class Param(Token):
    index: int = 1


@dataclass(frozen=True)
class ParBreak(Token):
    pass


def _normalize(source: str) -> str:
    return source.replace("\r\n", "\n").replace("\r", "\n")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> Optional[str]:
        return self.text[self.pos] if self.pos < len(self.text) else None

    def advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def startswith(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)


_VERB_ENV = "\\begin{verbatim}"
_VERB_END = "\\end{verbatim}"


def tokenize(
    source: str, table: Optional[CatcodeTable] = None
) -> tuple[list[Token], list[Diagnostic]]:
    """Lex `source` into tokens. Comments are stripped, space runs collapse
    to one space token, blank lines become a single ParBreak."""
    table = table or CatcodeTable.default()
    sc = _Scanner(_normalize(source))
    tokens: list[Token] = []
    diags: list[Diagnostic] = []

    pending_space = False  # a space/newline seen since the last real token
    newline_run = 0  # consecutive newlines in the current whitespace run
    suppress_space = False  # after a control word: whitespace is consumed

    def flush_space(line: int, col: int) -> None:
        nonlocal pending_space, newline_run, suppress_space
        if newline_run >= 2 and tokens and not isinstance(tokens[-1], ParBreak):
            tokens.append(ParBreak(line, col))
        elif pending_space and tokens and not isinstance(tokens[-1], ParBreak):
            tokens.append(Char(line, col, " ", Catcode.SPACE))
        pending_space = False
        newline_run = 0
        suppress_space = False

    def emit(tok: Token) -> None:
        flush_space(tok.line, tok.column)
        tokens.append(tok)

    def read_group_verbatim() -> None:
        # inside verbatim: every char (incl. whitespace) kept as category other
        while not sc.eof() and not sc.startswith(_VERB_END):
            line, col = sc.line, sc.col
            ch = sc.advance()
            tokens.append(Char(line, col, ch, Catcode.OTHER))
        if sc.eof():
            diags.append(
                warning("lexer", "unterminated-verbatim",
                        "verbatim environment not closed before end of input",
                        sc.line, sc.col))
        else:
            # emit the \end{verbatim} tokens normally
            line, col = sc.line, sc.col
            for _ in range(len(_VERB_END)):
                sc.advance()
            tokens.append(ControlSeq(line, col, "end"))
            tokens.append(Char(line, col, "{", Catcode.BEGIN_GROUP))
            for c in "verbatim":
                tokens.append(Char(line, col, c, Catcode.LETTER))
            tokens.append(Char(line, col, "}", Catcode.END_GROUP))

    while not sc.eof():
        line, col = sc.line, sc.col

        if sc.startswith(_VERB_ENV):
            flush_space(line, col)
            for _ in range(len(_VERB_ENV)):
                sc.advance()
            tokens.append(ControlSeq(line, col, "begin"))
            tokens.append(Char(line, col, "{", Catcode.BEGIN_GROUP))
            for c in "verbatim":
                tokens.append(Char(line, col, c, Catcode.LETTER))
            tokens.append(Char(line, col, "}", Catcode.END_GROUP))
            # the newline right after \begin{verbatim} is not content
            if sc.peek() == "\n":
                sc.advance()
            read_group_verbatim()
            continue

        ch = sc.advance()
        if ch == "\n":
            newline_run += 1
            if not suppress_space or newline_run >= 2:
                pending_space = True
            continue

        cat = table.category(ch)

        if cat == Catcode.SPACE:
            if not suppress_space:
                pending_space = True
            continue

        if cat == Catcode.COMMENT:
            # strip to and including end of line; the newline vanishes too
            while not sc.eof() and sc.peek() != "\n":
                sc.advance()
            if not sc.eof():
                sc.advance()
            continue

        if cat == Catcode.ESCAPE:
            nxt = sc.peek()
            if nxt is None:
                diags.append(warning("lexer", "trailing-escape",
                                     "escape character at end of input dropped",
                                     line, col))
                break
            if table.category(nxt) == Catcode.LETTER:
                name = []
                while (c := sc.peek()) is not None and table.category(c) == Catcode.LETTER:
                    name.append(sc.advance())
                emit(ControlSeq(line, col, "".join(name)))
                if "".join(name) == "catcode":
                    diags.append(warning("lexer", "catcode-unsupported",
                                         "\\catcode reassignment is not supported; ignored",
                                         line, col))
                if "".join(name) == "verb":
                    # \verb<delim>...<delim>: raw until the same delimiter
                    if not sc.eof():
                        dline, dcol = sc.line, sc.col
                        delim = sc.advance()
                        tokens.append(Char(dline, dcol, delim, Catcode.OTHER))
                        closed = False
                        while not sc.eof():
                            cline, ccol = sc.line, sc.col
                            c2 = sc.advance()
                            tokens.append(Char(cline, ccol, c2, Catcode.OTHER))
                            if c2 == delim:
                                closed = True
                                break
                        if not closed:
                            diags.append(warning("lexer", "unterminated-verb",
                                                 "\\verb not closed before end of input",
                                                 line, col))
                    continue
                # a control word consumes following whitespace
                suppress_space = True
            else:
                emit(ControlSeq(line, col, sc.advance()))
            continue

        if cat == Catcode.PARAMETER:
            nxt = sc.peek()
            if nxt is not None and nxt.isdigit() and nxt != "0":
                sc.advance()
                emit(Param(line, col, int(nxt)))
            else:
                diags.append(warning("lexer", "stray-parameter",
                                     "parameter character not followed by 1-9",
                                     line, col))
                emit(Char(line, col, ch, Catcode.OTHER))
            continue

        emit(Char(line, col, ch, cat))

    return tokens, diags


def _needs_sep(name: str) -> bool:
    return len(name) != 1 or name.isalpha()


def detokenize(tokens: Sequence[Token]) -> str:
    """Render tokens back to source-like text. Control words get a trailing
    space so re-tokenizing cannot merge them with following letters."""
    out: list[str] = []
    for tok in tokens:
        if isinstance(tok, ControlSeq):
            out.append("\\" + tok.name)
            if _needs_sep(tok.name):
                out.append(" ")
        elif isinstance(tok, Param):
            out.append(f"#{tok.index}")
        elif isinstance(tok, ParBreak):
            out.append("\n\n")
        elif isinstance(tok, Char):
            out.append(tok.value)
    return "".join(out)


def canonical(tokens: Sequence[Token]) -> str:
    """Stable one-line-per-token rendering used for stream comparison."""
    parts: list[str] = []
    for tok in tokens:
        if isinstance(tok, ControlSeq):
            parts.append(f"CS({tok.name})")
        elif isinstance(tok, Param):
            parts.append(f"PARAM({tok.index})")
        elif isinstance(tok, ParBreak):
            parts.append("PAR")
        elif isinstance(tok, Char):
            parts.append(f"CHAR({tok.value!r},{tok.category.value})")
    return "\n".join(parts)
