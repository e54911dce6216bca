"""Package handler registry.

Handlers are data, not code: each one is a bundle of macro definitions
injected into the document's macro environment when the corresponding
\\usepackage is seen. Packages we cannot honour are recorded so the
emitted page can warn the reader up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .diagnostics import Diagnostic, warning
from .lexer import Catcode, Char, ControlSeq, Token, tokenize
from .macros import MacroDef, MacroKind, MacroEnvironment

STAGE = "registry"

IMPLEMENTED = "implemented"
IGNORED_SAFE = "ignored-safe"


@dataclass(frozen=True)
class PackageHandler:
    name: str
    provided_macros: tuple[MacroDef, ...] = ()
    kind: str = IMPLEMENTED

    def __post_init__(self):
        names = [m.name for m in self.provided_macros]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate macro names in handler {self.name}")


def _body(tex: str) -> tuple[Token, ...]:
    toks, _ = tokenize(tex)
    return tuple(toks)


def _expandable(name: str, arity: int, tex: str) -> MacroDef:
    return MacroDef(name, arity, _body(tex))


def _chars(text: str) -> tuple[Token, ...]:
    return tuple(Char(0, 0, c, Catcode.OTHER) for c in text)


# Text-level commands every article uses, bound before any package loads.
_BASE_MACROS: tuple[MacroDef, ...] = (
    _expandable("textbf", 1, "#1"),
    _expandable("textit", 1, "#1"),
    _expandable("texttt", 1, "#1"),
    _expandable("textsc", 1, "#1"),
    _expandable("textrm", 1, "#1"),
    _expandable("emph", 1, "#1"),
    _expandable("mbox", 1, "#1"),
    MacroDef("TeX", 0, _chars("TeX")),
    MacroDef("LaTeX", 0, _chars("LaTeX")),
    MacroDef("ldots", 0, _chars("…")),
    MacroDef("dots", 0, _chars("…")),
    MacroDef("%", 0, _chars("%")),
    MacroDef("&", 0, _chars("&")),
    MacroDef("#", 0, _chars("#")),
    MacroDef("_", 0, _chars("_")),
    MacroDef("$", 0, _chars("$")),
    MacroDef("{", 0, _chars("{")),
    MacroDef("}", 0, _chars("}")),
    MacroDef(" ", 0, (Char(0, 0, " ", Catcode.SPACE),)),
    MacroDef("noindent", 0, (), MacroKind.IGNORED),
    MacroDef("centering", 0, (), MacroKind.IGNORED),
    MacroDef("small", 0, (), MacroKind.IGNORED),
    MacroDef("large", 0, (), MacroKind.IGNORED),
    MacroDef("Large", 0, (), MacroKind.IGNORED),
    MacroDef("clearpage", 0, (), MacroKind.IGNORED),
    MacroDef("newpage", 0, (), MacroKind.IGNORED),
    MacroDef("vspace", 1, (), MacroKind.IGNORED),
    MacroDef("hspace", 1, (), MacroKind.IGNORED),
)


def base_environment() -> MacroEnvironment:
    env = MacroEnvironment()
    for macro in _BASE_MACROS:
        env.bind(macro)
    return env


def _default_handlers() -> list[PackageHandler]:
    return [
        PackageHandler("graphicx", (
            MacroDef("graphicspath", 1, (), MacroKind.IGNORED),
            MacroDef("resizebox", 3, _body("#3")),
        )),
        PackageHandler("amsmath", (
            _expandable("eqref", 1, "(\\ref{#1})"),
            MacroDef("numberwithin", 2, (), MacroKind.IGNORED),
        )),
        PackageHandler("amssymb", ()),
        PackageHandler("url", ()),
        PackageHandler("xcolor", (
            _expandable("textcolor", 2, "#2"),
            MacroDef("color", 1, (), MacroKind.IGNORED),
            MacroDef("definecolor", 3, (), MacroKind.IGNORED),
        )),
        PackageHandler("enumitem", (
            MacroDef("setlist", 1, (), MacroKind.IGNORED),
        )),
        PackageHandler("geometry", kind=IGNORED_SAFE),
        PackageHandler("babel", kind=IGNORED_SAFE),
        PackageHandler("inputenc", kind=IGNORED_SAFE),
        PackageHandler("fontenc", kind=IGNORED_SAFE),
        PackageHandler("microtype", kind=IGNORED_SAFE),
        PackageHandler("setspace", kind=IGNORED_SAFE),
    ]


class PackageRegistry:
    """Built once at startup, read-only afterwards."""

    def __init__(self, handlers: Optional[list[PackageHandler]] = None):
        self._handlers: dict[str, PackageHandler] = {}
        for h in (handlers if handlers is not None else _default_handlers()):
            self._handlers[h.name] = h

    def resolve(self, name: str) -> Optional[PackageHandler]:
        """Handler for `name`, or None for an unknown package."""
        return self._handlers.get(name)

    def register(self, handler: PackageHandler, *, strict: bool = False
                 ) -> list[Diagnostic]:
        diags: list[Diagnostic] = []
        if strict and handler.name in self._handlers:
            diags.append(warning(STAGE, "handler-replaced",
                                 f"handler for package {handler.name} replaced"))
        self._handlers[handler.name] = handler
        return diags

    def names(self) -> set[str]:
        return set(self._handlers)

    def load_directory(self, path: Path) -> list[Diagnostic]:
        """Load every *.pkg file in `path` (see parse_handler_file)."""
        diags: list[Diagnostic] = []
        for f in sorted(Path(path).glob("*.pkg")):
            handler, d = parse_handler_file(f)
            diags.extend(d)
            if handler is not None:
                diags.extend(self.register(handler))
        return diags


def parse_handler_file(path: Path) -> tuple[Optional[PackageHandler], list[Diagnostic]]:
    """One file per package. Line-oriented format:

        kind implemented            # or: kind ignored-safe
        macro <name> <arity> <body tex>
        ignored <name> <arity>      # swallowed, substitutes to nothing

    Blank lines and lines starting with '#' are skipped; the package name
    is the file stem.
    """
    path = Path(path)
    name = path.stem
    kind = IMPLEMENTED
    macros: list[MacroDef] = []
    diags: list[Diagnostic] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        keyword, rest = parts[0], (parts[1] if len(parts) > 1 else "")
        if keyword == "kind":
            if rest not in (IMPLEMENTED, IGNORED_SAFE):
                diags.append(warning(STAGE, "bad-handler-file",
                                     f"{path.name}:{lineno}: unknown kind {rest!r}"))
            else:
                kind = rest
        elif keyword in ("macro", "ignored"):
            fields = rest.split(None, 2)
            if len(fields) < 2 or not fields[1].isdigit():
                diags.append(warning(STAGE, "bad-handler-file",
                                     f"{path.name}:{lineno}: expected '<name> <arity> [body]'"))
                continue
            mname, arity = fields[0].lstrip("\\"), int(fields[1])
            body = fields[2] if len(fields) > 2 else ""
            try:
                if keyword == "ignored":
                    macros.append(MacroDef(mname, arity, (), MacroKind.IGNORED))
                else:
                    macros.append(MacroDef(mname, arity, _body(body)))
            except ValueError as exc:
                diags.append(warning(STAGE, "bad-handler-file",
                                     f"{path.name}:{lineno}: {exc}"))
        else:
            diags.append(warning(STAGE, "bad-handler-file",
                                 f"{path.name}:{lineno}: unknown keyword {keyword!r}"))
    try:
        return PackageHandler(name, tuple(macros), kind), diags
    except ValueError as exc:
        diags.append(warning(STAGE, "bad-handler-file", f"{path.name}: {exc}"))
        return None, diags
