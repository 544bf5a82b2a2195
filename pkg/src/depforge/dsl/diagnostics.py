"""Source files, spans and diagnostics for the .dep frontend."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str


@dataclass(frozen=True)
class Span:
    line: int  # 1-based
    column: int  # 1-based
    length: int


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # 'error' | 'warning'
    path: str
    span: Span
    message: str

    def __str__(self):
        return (
            f"{self.path}:{self.span.line}:{self.span.column}: "
            f"{self.severity}: {self.message}"
        )


def sort_key(d: Diagnostic):
    return (d.path, d.span.line, d.span.column)
