"""Diagnostic records shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class Severity(str, Enum):
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    stage: str
    code: str
    message: str
    line: Optional[int] = None
    column: Optional[int] = None

    def format(self) -> str:
        loc = f" at {self.line}:{self.column}" if self.line is not None else ""
        return f"[{self.severity.value}] {self.stage}/{self.code}{loc}: {self.message}"


def info(stage: str, code: str, message: str, line=None, column=None) -> Diagnostic:
    return Diagnostic(Severity.INFO, stage, code, message, line, column)


def warning(stage: str, code: str, message: str, line=None, column=None) -> Diagnostic:
    return Diagnostic(Severity.WARNING, stage, code, message, line, column)


def error(stage: str, code: str, message: str, line=None, column=None) -> Diagnostic:
    return Diagnostic(Severity.ERROR, stage, code, message, line, column)
