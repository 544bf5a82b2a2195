"""Textual frontend for architecture models (.dep files)."""

from __future__ import annotations

import os

from .diagnostics import Diagnostic, SourceFile, Span
from .lexer import tokenize
from .parser import parse_expr_text, parse_formula_text, parse_model
from .printer import serialize_model

__all__ = [
    "Diagnostic",
    "SourceFile",
    "Span",
    "load_model",
    "parse_expr_text",
    "parse_formula_text",
    "parse_model",
    "serialize_model",
    "tokenize",
]


def load_model(path: str):
    """Read ``path`` and every file it transitively imports, then parse.

    Missing import files become diagnostics rather than IO errors.
    """
    sources: list[SourceFile] = []
    seen: set[str] = set()

    def read(p: str):
        norm = os.path.normpath(p)
        if norm in seen:
            return
        seen.add(norm)
        try:
            with open(norm, encoding="utf-8") as fh:
                text = fh.read()
        except OSError:
            return
        sources.append(SourceFile(norm.replace(os.sep, "/"), text))
        for imp in _imports_of(text):
            read(os.path.join(os.path.dirname(norm), imp))

    read(path)
    if not sources:
        return None, [
            Diagnostic("error", path, Span(1, 1, 0), "cannot read file")
        ]
    return parse_model(sources)


def _imports_of(text: str) -> list[str]:
    tokens, _ = tokenize("<scan>", text)
    out = []
    for i, t in enumerate(tokens):
        if t.kind == "keyword" and t.value == "import":
            if i + 1 < len(tokens) and tokens[i + 1].kind == "string":
                out.append(tokens[i + 1].value)
        if t.kind == "keyword" and t.value == "model":
            break
    return out
