"""Structured math rendering for a small TeX math grammar.

Supported: identifiers, numbers, the usual operators and relations,
^ and _ scripts, \\frac, \\sqrt, greek letters, \\mathbf/\\mathit and a
handful of symbol commands. Anything outside the grammar makes the whole
expression fall back to its literal source (the caller wraps it visibly).
"""

from __future__ import annotations

import re
from html import escape
from typing import Optional

GREEK = {
    "alpha": "α", "beta": "β", "gamma": "γ", "delta": "δ", "epsilon": "ε",
    "varepsilon": "ε", "zeta": "ζ", "eta": "η", "theta": "θ", "vartheta": "ϑ",
    "iota": "ι", "kappa": "κ", "lambda": "λ", "mu": "μ", "nu": "ν", "xi": "ξ",
    "pi": "π", "rho": "ρ", "sigma": "σ", "tau": "τ", "upsilon": "υ",
    "phi": "φ", "varphi": "φ", "chi": "χ", "psi": "ψ", "omega": "ω",
    "Gamma": "Γ", "Delta": "Δ", "Theta": "Θ", "Lambda": "Λ", "Xi": "Ξ",
    "Pi": "Π", "Sigma": "Σ", "Upsilon": "Υ", "Phi": "Φ", "Psi": "Ψ",
    "Omega": "Ω",
}

_OPERATOR_COMMANDS = {
    "cdot": "⋅", "times": "×", "pm": "±", "mp": "∓", "div": "÷",
    "leq": "≤", "le": "≤", "geq": "≥", "ge": "≥", "neq": "≠", "ne": "≠",
    "approx": "≈", "sim": "∼", "equiv": "≡", "propto": "∝",
    "rightarrow": "→", "to": "→", "leftarrow": "←", "Rightarrow": "⇒",
    "in": "∈", "notin": "∉", "subset": "⊂", "subseteq": "⊆", "cup": "∪",
    "cap": "∩", "sum": "∑", "prod": "∏", "int": "∫", "partial": "∂",
    "nabla": "∇", "infty": "∞", "forall": "∀", "exists": "∃",
    "ldots": "…", "cdots": "⋯", "prime": "′",
}

_FUNC_COMMANDS = {"sin", "cos", "tan", "log", "ln", "exp", "lim", "max", "min"}

_STYLE_COMMANDS = {"mathbf": "bold", "mathit": "italic", "mathrm": "normal",
                   "mathbb": "double-struck", "mathcal": "script"}

_OPERATOR_CHARS = set("+-=<>/*,.;:!()[]|'")

_TOKEN_RE = re.compile(
    r"\\[a-zA-Z]+|\\.|[0-9]+(?:\.[0-9]+)?|[a-zA-Z]|[+\-=<>/*,.;:!()\[\]|']|\^|_|\{|\}|\s+")


class _Unsupported(Exception):
    pass


class _MathParser:
    def __init__(self, tex: str):
        self.toks: list[str] = []
        pos = 0
        for m in _TOKEN_RE.finditer(tex):
            if m.start() != pos:
                raise _Unsupported(f"unexpected {tex[pos:m.start()]!r}")
            pos = m.end()
            if not m.group().isspace():
                self.toks.append(m.group())
        if pos != len(tex):
            raise _Unsupported(f"unexpected {tex[pos:]!r}")
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> str:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def parse_sequence(self, stop: Optional[str] = None) -> str:
        items: list[str] = []
        while (tok := self.peek()) is not None and tok != stop:
            items.append(self.parse_scripted())
        if len(items) == 1:
            return items[0]
        return "<mrow>" + "".join(items) + "</mrow>"

    def parse_scripted(self) -> str:
        base = self.parse_atom()
        sup = sub = None
        while (tok := self.peek()) in ("^", "_"):
            self.next()
            arg = self.parse_atom()
            if tok == "^":
                if sup is not None:
                    raise _Unsupported("double superscript")
                sup = arg
            else:
                if sub is not None:
                    raise _Unsupported("double subscript")
                sub = arg
        if sup is not None and sub is not None:
            return f"<msubsup>{base}{sub}{sup}</msubsup>"
        if sup is not None:
            return f"<msup>{base}{sup}</msup>"
        if sub is not None:
            return f"<msub>{base}{sub}</msub>"
        return base

    def parse_atom(self) -> str:
        tok = self.peek()
        if tok is None:
            raise _Unsupported("unexpected end of expression")
        self.next()
        if tok == "{":
            inner = self.parse_sequence(stop="}")
            if self.peek() != "}":
                raise _Unsupported("unbalanced group")
            self.next()
            return inner
        if tok == "}":
            raise _Unsupported("unbalanced group")
        if tok in ("^", "_"):
            raise _Unsupported("script without base")
        if tok.startswith("\\"):
            name = tok[1:]
            if name == "frac":
                num = self.parse_atom()
                den = self.parse_atom()
                return f"<mfrac>{num}{den}</mfrac>"
            if name == "sqrt":
                return f"<msqrt>{self.parse_atom()}</msqrt>"
            if name in _STYLE_COMMANDS:
                inner = self.parse_atom()
                return (f'<mstyle mathvariant="{_STYLE_COMMANDS[name]}">'
                        f"{inner}</mstyle>")
            if name in GREEK:
                return f"<mi>{GREEK[name]}</mi>"
            if name in _OPERATOR_COMMANDS:
                return f"<mo>{escape(_OPERATOR_COMMANDS[name])}</mo>"
            if name in _FUNC_COMMANDS:
                return f"<mi>{name}</mi>"
            raise _Unsupported(f"command \\{name}")
        if tok[0].isdigit():
            return f"<mn>{tok}</mn>"
        if tok.isalpha():
            return f"<mi>{tok}</mi>"
        if tok in _OPERATOR_CHARS or all(c in _OPERATOR_CHARS for c in tok):
            return f"<mo>{escape(tok)}</mo>"
        raise _Unsupported(f"token {tok!r}")


def render_math(tex: str, display: bool = False) -> Optional[str]:
    """MathML for `tex`, or None when the expression is outside the
    supported grammar (caller falls back to the literal source)."""
    if not tex.strip():
        return None
    try:
        body = _MathParser(tex.strip()).parse_sequence()
    except _Unsupported:
        return None
    mode = ' display="block"' if display else ""
    return f"<math{mode}>{body}</math>"
