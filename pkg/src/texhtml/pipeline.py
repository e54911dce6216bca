"""Single-document conversion: lex -> expand -> parse -> emit, with the
outcome classified into the four-way taxonomy.

convert() never raises on document content: every failure mode is folded
into the result's diagnostics and status.
"""

from __future__ import annotations

import time
import traceback
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .diagnostics import Diagnostic, Severity, error, info, warning
from .docmodel import Document, parse, resolve_refs
from .emitter import EmitOptions, EmitterFailure, HtmlArtifact, emit
from .lexer import Catcode, Char, ControlSeq, Token, tokenize
from .macros import ExpansionBudget, MacroEnvironment, expand
from .packages import IGNORED_SAFE, PackageRegistry, base_environment

STAGE = "pipeline"

DEFAULT_FUEL = 100_000
DEFAULT_TIME_BUDGET = 30.0  # seconds
_MAX_INPUT_DEPTH = 16


class Status(str, Enum):
    SUCCESS = "Success"
    SUCCESS_WITH_WARNINGS = "SuccessWithWarnings"
    ERRORS_BUT_READABLE = "ErrorsButReadable"
    FAILED = "Failed"


class NoMainFile(Exception):
    pass


@dataclass
class SourceBundle:
    paper_id: str
    files: dict[str, bytes]
    main_file: Optional[str] = None

    @classmethod
    def from_directory(cls, path: Path, paper_id: Optional[str] = None) -> "SourceBundle":
        """Bundle from a directory tree; main file detected by content."""
        path = Path(path)
        files: dict[str, bytes] = {}
        for f in sorted(path.rglob("*")):
            if f.is_file():
                files[str(f.relative_to(path))] = f.read_bytes()
        main, _ = detect_main_file(files)
        return cls(paper_id or path.name, files, main)


def detect_main_file(files: dict[str, bytes]) -> tuple[str, list[Diagnostic]]:
    """The unique file containing \\documentclass; ties go to the
    lexicographically smallest path."""
    if not files:
        raise NoMainFile("bundle contains no files")
    candidates = sorted(p for p, data in files.items()
                        if b"\\documentclass" in data)
    if not candidates:
        raise NoMainFile("no file contains \\documentclass")
    diags: list[Diagnostic] = []
    if len(candidates) > 1:
        diags.append(info(STAGE, "main-file-tie",
                          f"{len(candidates)} candidate main files; "
                          f"using {candidates[0]}"))
    return candidates[0], diags


@dataclass
class ConvertOptions:
    fuel: int = DEFAULT_FUEL
    time_budget: float = DEFAULT_TIME_BUDGET
    dump_ast: bool = False
    reader_chrome_url: Optional[str] = None


@dataclass
class ConversionResult:
    paper_id: str
    status: Status
    diagnostics: list[Diagnostic] = field(default_factory=list)
    html: Optional[HtmlArtifact] = None
    timing_ms: float = 0.0
    unknown_packages: set[str] = field(default_factory=set)
    document: Optional[Document] = None

    @property
    def bundle_invalid(self) -> bool:
        return any(d.code == "bundle-invalid" for d in self.diagnostics)

    def exit_code(self) -> int:
        if self.bundle_invalid:
            return 3
        return {Status.SUCCESS: 0, Status.SUCCESS_WITH_WARNINGS: 0,
                Status.ERRORS_BUT_READABLE: 1, Status.FAILED: 2}[self.status]


def _decode(data: bytes) -> str:
    return data.decode("utf-8", errors="replace")


def _splice_inputs(tokens: list[Token], bundle: SourceBundle,
                   diags: list[Diagnostic], depth: int = 0) -> list[Token]:
    """Resolve \\input/\\include within the bundle. Missing files stay in
    the stream so the page shows the command visibly."""
    out: list[Token] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if isinstance(tok, ControlSeq) and tok.name in ("input", "include"):
            j = i + 1
            while j < n and isinstance(tokens[j], Char) \
                    and tokens[j].category == Catcode.SPACE:
                j += 1
            if j < n and isinstance(tokens[j], Char) \
                    and tokens[j].category == Catcode.BEGIN_GROUP:
                depth_braces = 1
                k = j + 1
                name_chars: list[str] = []
                while k < n and depth_braces > 0:
                    t = tokens[k]
                    if isinstance(t, Char):
                        if t.category == Catcode.BEGIN_GROUP:
                            depth_braces += 1
                        elif t.category == Catcode.END_GROUP:
                            depth_braces -= 1
                            if depth_braces == 0:
                                break
                        name_chars.append(t.value)
                    k += 1
                fname = "".join(name_chars).strip()
                data = bundle.files.get(fname)
                if data is None and not fname.endswith(".tex"):
                    data = bundle.files.get(fname + ".tex")
                if data is not None:
                    if depth >= _MAX_INPUT_DEPTH:
                        diags.append(warning(STAGE, "input-depth",
                                             f"\\input nesting too deep at {fname}; "
                                             "not expanded"))
                        out.extend(tokens[i:k + 1])
                    else:
                        sub_toks, sub_diags = tokenize(_decode(data))
                        diags.extend(sub_diags)
                        out.extend(_splice_inputs(sub_toks, bundle, diags, depth + 1))
                    i = k + 1
                    continue
                diags.append(warning(STAGE, "missing-input",
                                     f"\\{tok.name}{{{fname}}} not found in bundle; "
                                     "left in the text", tok.line, tok.column))
                out.extend(tokens[i:k + 1])
                i = k + 1
                continue
        out.append(tok)
        i += 1
    return out


def _scan_packages(tokens: list[Token]) -> list[str]:
    """Package names requested via \\usepackage, in order of appearance."""
    names: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if isinstance(tok, ControlSeq) and tok.name == "usepackage":
            j = i + 1
            # skip spaces and an optional [...] options block
            while j < n and isinstance(tokens[j], Char) \
                    and tokens[j].category == Catcode.SPACE:
                j += 1
            if j < n and isinstance(tokens[j], Char) and tokens[j].value == "[":
                while j < n and not (isinstance(tokens[j], Char)
                                     and tokens[j].value == "]"):
                    j += 1
                j += 1
            while j < n and isinstance(tokens[j], Char) \
                    and tokens[j].category == Catcode.SPACE:
                j += 1
            if j < n and isinstance(tokens[j], Char) \
                    and tokens[j].category == Catcode.BEGIN_GROUP:
                j += 1
                chars: list[str] = []
                while j < n and not (isinstance(tokens[j], Char)
                                     and tokens[j].category == Catcode.END_GROUP):
                    if isinstance(tokens[j], Char):
                        chars.append(tokens[j].value)
                    j += 1
                names.extend(p.strip() for p in "".join(chars).split(",") if p.strip())
            i = j
        i += 1
    return names


def _status_from(diags: list[Diagnostic], failed: bool, has_html: bool) -> Status:
    if failed or not has_html:
        return Status.FAILED
    severities = {d.severity for d in diags}
    if Severity.ERROR in severities:
        return Status.ERRORS_BUT_READABLE
    if Severity.WARNING in severities:
        return Status.SUCCESS_WITH_WARNINGS
    return Status.SUCCESS


def convert(bundle: SourceBundle, registry: Optional[PackageRegistry] = None,
            options: Optional[ConvertOptions] = None) -> ConversionResult:
    """Run all stages with error recovery and classify the outcome."""
    registry = registry or PackageRegistry()
    options = options or ConvertOptions()
    start = time.monotonic()
    diags: list[Diagnostic] = []
    failed = False
    html: Optional[HtmlArtifact] = None
    document: Optional[Document] = None

    def over_budget() -> bool:
        if time.monotonic() - start > options.time_budget:
            diags.append(error(STAGE, "timeout",
                               f"conversion exceeded the {options.time_budget}s budget"))
            return True
        return False

    try:
        main_name = bundle.main_file
        if main_name is None:
            try:
                main_name, detect_diags = detect_main_file(bundle.files)
                diags.extend(detect_diags)
            except NoMainFile as exc:
                diags.append(error(STAGE, "bundle-invalid", str(exc)))
                return ConversionResult(bundle.paper_id, Status.FAILED, diags,
                                        timing_ms=(time.monotonic() - start) * 1000)
        main_data = bundle.files.get(main_name)
        if main_data is None or b"\\documentclass" not in main_data:
            diags.append(error(STAGE, "bundle-invalid",
                               "main file missing or lacks \\documentclass"))
            return ConversionResult(bundle.paper_id, Status.FAILED, diags,
                                    timing_ms=(time.monotonic() - start) * 1000)

        tokens, lex_diags = tokenize(_decode(main_data))
        diags.extend(lex_diags)
        tokens = _splice_inputs(tokens, bundle, diags)
        if over_budget():
            failed = True
        else:
            env = base_environment()
            for pkg in _scan_packages(tokens):
                handler = registry.resolve(pkg)
                if handler is not None and handler.kind != IGNORED_SAFE:
                    for macro in handler.provided_macros:
                        env.bind(macro)
            result = expand(tokens, env, ExpansionBudget(options.fuel))
            diags.extend(result.diagnostics)
            if result.fuel_exhausted or over_budget():
                failed = True
            else:
                document = parse(result.tokens, registry)
                document = resolve_refs(document)
                diags.extend(document.diagnostics)
                if over_budget():
                    failed = True
                else:
                    try:
                        html = emit(document, EmitOptions(
                            paper_id=bundle.paper_id,
                            include_reader_chrome=options.reader_chrome_url))
                        diags.extend(html.warnings)
                    except EmitterFailure as exc:
                        diags.append(error("emitter", "emitter-failure", str(exc)))
                        failed = True
    except Exception:  # totality: any internal defect becomes a Failed result
        diags.append(error(STAGE, "internal-error",
                           "unexpected converter error: "
                           + traceback.format_exc(limit=3).strip().splitlines()[-1]))
        failed = True
        html = None

    status = _status_from(diags, failed, html is not None)
    if status == Status.FAILED:
        html = None
    return ConversionResult(
        paper_id=bundle.paper_id,
        status=status,
        diagnostics=diags,
        html=html,
        timing_ms=(time.monotonic() - start) * 1000,
        unknown_packages=set(document.unknown_packages) if document else set(),
        document=document,
    )
