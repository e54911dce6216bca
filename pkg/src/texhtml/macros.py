"""Fuel-bounded macro expansion.

Structure-bearing commands (sectioning, environments, captions, ...) are
never substituted: they travel through expansion untouched so the document
parser can see them. Unknown control sequences also pass through, recorded
as info-level diagnostics, instead of failing the conversion.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .diagnostics import Diagnostic, error, info, warning
from .lexer import Catcode, Char, ControlSeq, Param, ParBreak, Token

STAGE = "macro"

# Commands whose meaning is document structure; preserved verbatim.
STRUCTURAL_COMMANDS = frozenset({
    "documentclass", "usepackage",
    "section", "subsection", "subsubsection", "paragraph",
    "chapter", "part",
    "begin", "end", "item",
    "caption", "label", "ref", "cite",
    "includegraphics",
    "title", "author", "maketitle", "abstract",
    "verb", "url", "href",
    "input", "include",
    "par", "[", "]", "\\",
    "setcounter", "catcode",
    "footnote", "thanks",
})

# Commands with meaning only inside math; the math renderer owns them,
# so their presence is not an "unknown command" worth reporting.
MATH_COMMANDS = frozenset({
    "frac", "sqrt", "mathbf", "mathit", "mathrm", "mathbb", "mathcal",
    "left", "right", "text", "quad", "qquad", "nonumber", "notag",
    "alpha", "beta", "gamma", "delta", "epsilon", "varepsilon", "zeta",
    "eta", "theta", "vartheta", "iota", "kappa", "lambda", "mu", "nu",
    "xi", "pi", "rho", "sigma", "tau", "upsilon", "phi", "varphi", "chi",
    "psi", "omega", "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi",
    "Sigma", "Upsilon", "Phi", "Psi", "Omega",
    "cdot", "times", "pm", "mp", "div", "leq", "le", "geq", "ge", "neq",
    "ne", "approx", "sim", "equiv", "propto", "rightarrow", "to",
    "leftarrow", "Rightarrow", "in", "notin", "subset", "subseteq",
    "cup", "cap", "sum", "prod", "int", "partial", "nabla", "infty",
    "forall", "exists", "cdots", "prime",
    "sin", "cos", "tan", "log", "ln", "exp", "lim", "max", "min",
})

# Definition forms the expander itself interprets.
_DEF_FORMS = frozenset({"def", "newcommand", "renewcommand", "providecommand",
                        "newenvironment", "renewenvironment"})


class MacroKind(Enum):
    EXPANDABLE = "expandable"
    STRUCTURAL = "structural"
    IGNORED = "ignored"


@dataclass(frozen=True)
class MacroDef:
    name: str
    arity: int
    body: tuple[Token, ...]
    kind: MacroKind = MacroKind.EXPANDABLE
    optional_default: Optional[tuple[Token, ...]] = None

    def __post_init__(self):
        if not 0 <= self.arity <= 9:
            raise ValueError(f"arity {self.arity} out of range")
        for tok in self.body:
            if isinstance(tok, Param) and tok.index > self.arity:
                raise ValueError(
                    f"body of \\{self.name} uses #{tok.index} but arity is {self.arity}")


class MacroEnvironment:
    """Name -> MacroDef map. Built once per document, then read-only."""

    def __init__(self, bindings: Optional[dict[str, MacroDef]] = None):
        self._bindings: dict[str, MacroDef] = dict(bindings or {})

    def lookup(self, name: str) -> Optional[MacroDef]:
        return self._bindings.get(name)

    def bind(self, macro: MacroDef) -> None:
        self._bindings[macro.name] = macro

    def names(self) -> set[str]:
        return set(self._bindings)

    def copy(self) -> "MacroEnvironment":
        return MacroEnvironment(self._bindings)


def define(name: str, arity: int, body: Sequence[Token],
           env: MacroEnvironment, *, replace_existing: bool = False,
           kind: MacroKind = MacroKind.EXPANDABLE,
           ) -> tuple[MacroEnvironment, list[Diagnostic]]:
    """Add a binding. \\newcommand over an existing name keeps the new
    binding but reports it; a body referencing parameters beyond the arity
    is rejected."""
    diags: list[Diagnostic] = []
    try:
        macro = MacroDef(name, arity, tuple(body), kind)
    except ValueError as exc:
        diags.append(warning(STAGE, "bad-definition", str(exc)))
        return env, diags
    if env.lookup(name) is not None and not replace_existing:
        diags.append(warning(STAGE, "redefinition",
                             f"\\{name} is already defined; keeping the new definition"))
    env.bind(macro)
    return env, diags


@dataclass
class ExpansionBudget:
    fuel: int = 100_000

    def __post_init__(self):
        if self.fuel <= 0:
            raise ValueError("fuel must be positive")


@dataclass
class ExpansionResult:
    tokens: list[Token]
    diagnostics: list[Diagnostic]
    fuel_exhausted: bool = False


def _is_char(tok: Token, value: str) -> bool:
    return isinstance(tok, Char) and tok.value == value


def _skip_spaces(queue: deque[Token]) -> None:
    while queue and isinstance(queue[0], Char) and queue[0].category == Catcode.SPACE:
        queue.popleft()


def _grab_group(queue: deque[Token]) -> tuple[list[Token], bool]:
    """Balanced {...} content; closed=False when the stream ends mid-group."""
    assert queue and isinstance(queue[0], Char) and queue[0].category == Catcode.BEGIN_GROUP
    queue.popleft()
    depth = 1
    out: list[Token] = []
    while queue:
        tok = queue.popleft()
        if isinstance(tok, Char):
            if tok.category == Catcode.BEGIN_GROUP:
                depth += 1
            elif tok.category == Catcode.END_GROUP:
                depth -= 1
                if depth == 0:
                    return out, True
        out.append(tok)
    return out, False


def _grab_argument(queue: deque[Token]) -> Optional[list[Token]]:
    """A single undelimited macro argument: the next group or the next token."""
    _skip_spaces(queue)
    if not queue:
        return None
    head = queue[0]
    if isinstance(head, Char) and head.category == Catcode.BEGIN_GROUP:
        content, _ = _grab_group(queue)
        return content
    return [queue.popleft()]


def _grab_optional(queue: deque[Token]) -> Optional[list[Token]]:
    """[...] bracket argument if present, else None."""
    _skip_spaces(queue)
    if not queue or not _is_char(queue[0], "["):
        return None
    queue.popleft()
    out: list[Token] = []
    depth = 0
    while queue:
        tok = queue.popleft()
        if isinstance(tok, Char):
            if tok.category == Catcode.BEGIN_GROUP:
                depth += 1
            elif tok.category == Catcode.END_GROUP:
                depth -= 1
            elif tok.value == "]" and depth == 0:
                return out
        out.append(tok)
    return out


def _substitute(body: Sequence[Token], args: Sequence[Sequence[Token]]) -> list[Token]:
    out: list[Token] = []
    for tok in body:
        if isinstance(tok, Param):
            out.extend(args[tok.index - 1])
        else:
            out.append(tok)
    return out


def _parse_def(queue: deque[Token], env: MacroEnvironment,
               diags: list[Diagnostic]) -> None:
    """\\def\\name<params>{body} with undelimited #1..#n only."""
    _skip_spaces(queue)
    if not queue or not isinstance(queue[0], ControlSeq):
        diags.append(warning(STAGE, "bad-def", "\\def not followed by a control sequence"))
        return
    name = queue.popleft().name
    params = 0
    while queue and isinstance(queue[0], Param):
        tok = queue.popleft()
        if tok.index != params + 1:
            diags.append(warning(STAGE, "delimited-def-unsupported",
                                 f"non-sequential parameters in \\def\\{name}; macro ignored"))
            _skip_to_body(queue)
            return
        params += 1
    _skip_spaces(queue)
    if not queue or not (isinstance(queue[0], Char)
                         and queue[0].category == Catcode.BEGIN_GROUP):
        diags.append(warning(STAGE, "delimited-def-unsupported",
                             f"delimited parameter text in \\def\\{name} is unsupported; "
                             "macro treated as unknown"))
        _skip_to_body(queue)
        return
    body, closed = _grab_group(queue)
    if not closed:
        diags.append(error(STAGE, "unterminated-definition",
                           f"body of \\def\\{name} not closed"))
        return
    _, d = define(name, params, body, env, replace_existing=True)
    diags.extend(d)


def _skip_to_body(queue: deque[Token]) -> None:
    """Recovery for unsupported \\def forms: drop tokens through the body group."""
    while queue:
        tok = queue[0]
        if isinstance(tok, Char) and tok.category == Catcode.BEGIN_GROUP:
            _grab_group(queue)
            return
        queue.popleft()


def _parse_newcommand(cmd: str, queue: deque[Token], env: MacroEnvironment,
                      diags: list[Diagnostic]) -> None:
    """\\newcommand{\\name}[n][default]{body} and the \\renewcommand /
    \\providecommand variants."""
    _skip_spaces(queue)
    name: Optional[str] = None
    if queue and isinstance(queue[0], ControlSeq):
        name = queue.popleft().name
    elif queue and isinstance(queue[0], Char) and queue[0].category == Catcode.BEGIN_GROUP:
        group, _ = _grab_group(queue)
        if len(group) == 1 and isinstance(group[0], ControlSeq):
            name = group[0].name
    if name is None:
        diags.append(warning(STAGE, "bad-definition",
                             f"\\{cmd} not followed by a command name"))
        return
    arity = 0
    opt = _grab_optional(queue)
    if opt is not None:
        digits = "".join(t.value for t in opt if isinstance(t, Char)).strip()
        if digits.isdigit():
            arity = int(digits)
        else:
            diags.append(warning(STAGE, "bad-definition",
                                 f"non-numeric argument count for \\{name}"))
    default = _grab_optional(queue)
    _skip_spaces(queue)
    if not queue or not (isinstance(queue[0], Char)
                         and queue[0].category == Catcode.BEGIN_GROUP):
        diags.append(warning(STAGE, "bad-definition", f"missing body for \\{name}"))
        return
    body, closed = _grab_group(queue)
    if not closed:
        diags.append(error(STAGE, "unterminated-definition",
                           f"body of \\{name} not closed"))
        return
    existing = env.lookup(name)
    if cmd == "providecommand" and existing is not None:
        return
    replace_existing = cmd in ("renewcommand", "renewenvironment")
    if existing is not None and not replace_existing:
        diags.append(warning(STAGE, "redefinition",
                             f"\\{name} is already defined; keeping the new definition"))
    try:
        macro = MacroDef(name, arity, tuple(body),
                         optional_default=tuple(default) if default is not None else None)
    except ValueError as exc:
        diags.append(warning(STAGE, "bad-definition", str(exc)))
        return
    env.bind(macro)


def _parse_newenvironment(cmd: str, queue: deque[Token], env: MacroEnvironment,
                          diags: list[Diagnostic]) -> None:
    """\\newenvironment{name}[n]{begin}{end} lowered to a begin/end macro pair."""
    _skip_spaces(queue)
    if not queue or not (isinstance(queue[0], Char)
                         and queue[0].category == Catcode.BEGIN_GROUP):
        diags.append(warning(STAGE, "bad-definition", f"\\{cmd} missing environment name"))
        return
    name_toks, _ = _grab_group(queue)
    name = "".join(t.value for t in name_toks if isinstance(t, Char)).strip()
    arity = 0
    opt = _grab_optional(queue)
    if opt is not None:
        digits = "".join(t.value for t in opt if isinstance(t, Char)).strip()
        arity = int(digits) if digits.isdigit() else 0
    begin_body = None
    end_body = None
    _skip_spaces(queue)
    if queue and isinstance(queue[0], Char) and queue[0].category == Catcode.BEGIN_GROUP:
        begin_body, _ = _grab_group(queue)
    _skip_spaces(queue)
    if queue and isinstance(queue[0], Char) and queue[0].category == Catcode.BEGIN_GROUP:
        end_body, _ = _grab_group(queue)
    if not name or begin_body is None or end_body is None:
        diags.append(warning(STAGE, "bad-definition", f"malformed \\{cmd}"))
        return
    replace_existing = cmd == "renewenvironment"
    for key, body, a in ((f"begin:{name}", begin_body, arity), (f"end:{name}", end_body, 0)):
        try:
            macro = MacroDef(key, a, tuple(body))
        except ValueError as exc:
            diags.append(warning(STAGE, "bad-definition", str(exc)))
            return
        if env.lookup(key) is not None and not replace_existing:
            diags.append(warning(STAGE, "redefinition",
                                 f"environment {name} is already defined; "
                                 "keeping the new definition"))
        env.bind(macro)


def expand(tokens: Iterable[Token], env: MacroEnvironment,
           budget: Optional[ExpansionBudget] = None) -> ExpansionResult:
    """Substitute expandable macros to fixpoint (substituted tokens are
    re-scanned), leaving structural and unknown control sequences intact."""
    budget = budget or ExpansionBudget()
    env = env.copy()  # definitions found in the stream stay document-local
    queue: deque[Token] = deque(tokens)
    out: list[Token] = []
    diags: list[Diagnostic] = []
    fuel = budget.fuel
    reported_unknown: set[str] = set()

    while queue:
        tok = queue.popleft()
        if not isinstance(tok, ControlSeq):
            out.append(tok)
            continue
        name = tok.name

        if name in _DEF_FORMS:
            if name == "def":
                _parse_def(queue, env, diags)
            elif name in ("newenvironment", "renewenvironment"):
                _parse_newenvironment(name, queue, env, diags)
            else:
                _parse_newcommand(name, queue, env, diags)
            continue

        if name in ("begin", "end") and queue and isinstance(queue[0], Char) \
                and queue[0].category == Catcode.BEGIN_GROUP:
            group, closed = _grab_group(queue)
            env_name = "".join(t.value for t in group if isinstance(t, Char)).strip()
            bound = env.lookup(f"{name}:{env_name}") if closed else None
            if bound is not None:
                args2: list[Sequence[Token]] = []
                short = False
                for _ in range(bound.arity):
                    arg = _grab_argument(queue)
                    if arg is None:
                        diags.append(error(STAGE, "missing-argument",
                                           f"environment {env_name} expects "
                                           f"{bound.arity} argument(s)",
                                           tok.line, tok.column))
                        short = True
                        break
                    args2.append(arg)
                if short:
                    out.append(tok)
                    continue
                fuel -= 1
                if fuel <= 0:
                    diags.append(error(STAGE, "fuel-exhausted",
                                       f"macro expansion exceeded the budget of "
                                       f"{budget.fuel} substitutions",
                                       tok.line, tok.column))
                    out.extend(queue)
                    return ExpansionResult(out, diags, fuel_exhausted=True)
                queue.extendleft(reversed(_substitute(bound.body, args2)))
                continue
            # not a user-defined environment: restore the name group
            restored: list[Token] = [Char(tok.line, tok.column, "{", Catcode.BEGIN_GROUP)]
            restored.extend(group)
            if closed:
                restored.append(Char(tok.line, tok.column, "}", Catcode.END_GROUP))
            queue.extendleft(reversed(restored))
            out.append(tok)
            continue

        macro = env.lookup(name)
        if macro is None:
            if name not in STRUCTURAL_COMMANDS and name not in MATH_COMMANDS \
                    and name not in reported_unknown:
                reported_unknown.add(name)
                diags.append(info(STAGE, "unknown-command",
                                  f"unknown command \\{name} passed through",
                                  tok.line, tok.column))
            out.append(tok)
            continue
        if macro.kind == MacroKind.STRUCTURAL:
            out.append(tok)
            continue
        if macro.kind == MacroKind.IGNORED:
            continue

        args: list[Sequence[Token]] = []
        first = 0
        if macro.optional_default is not None and macro.arity >= 1:
            got = _grab_optional(queue)
            args.append(got if got is not None else list(macro.optional_default))
            first = 1
        missing = False
        for _ in range(first, macro.arity):
            arg = _grab_argument(queue)
            if arg is None:
                diags.append(error(STAGE, "missing-argument",
                                   f"\\{name} expects {macro.arity} argument(s) "
                                   "but the input ended", tok.line, tok.column))
                out.append(tok)
                missing = True
                break
            args.append(arg)
        if missing:
            continue

        fuel -= 1
        if fuel <= 0:
            diags.append(error(STAGE, "fuel-exhausted",
                               f"macro expansion exceeded the budget of {budget.fuel} "
                               "substitutions", tok.line, tok.column))
            out.extend(queue)
            return ExpansionResult(out, diags, fuel_exhausted=True)
        replacement = _substitute(macro.body, args)
        queue.extendleft(reversed(replacement))

    return ExpansionResult(out, diags)
