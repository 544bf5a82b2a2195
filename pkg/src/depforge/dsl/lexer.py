"""Tokenizer for the .dep architecture language."""

from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import Diagnostic, Span

KEYWORDS = frozenset(
    """
    model block root import port in out bool int enum param sub connect
    contract assume guarantee behavior var transition error fault threat
    effects allocate requirement configuration true false forall
    """.split()
)

PUNCT = (
    "->",
    ":=",
    "..",
    "==",
    "!=",
    "<=",
    ">=",
    "&&",
    "||",
    "{",
    "}",
    "[",
    "]",
    "(",
    ")",
    ":",
    ";",
    ",",
    ".",
    "<",
    ">",
    "!",
    "+",
    "-",
    "*",
    "/",
    "=",
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'keyword' | 'int' | 'float' | 'string' | 'punct' | 'eof'
    value: str
    span: Span


def tokenize(path: str, text: str) -> tuple[list[Token], list[Diagnostic]]:
    """Scan the whole input; malformed characters become diagnostics, never
    exceptions, so downstream recovery sees a best-effort token stream."""
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def span(length: int) -> Span:
        return Span(line, col, length)

    def advance(k: int):
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            advance((j if j != -1 else n) - i)
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j == -1:
                diags.append(Diagnostic("error", path, span(2), "unterminated comment"))
                advance(n - i)
                continue
            advance(j + 2 - i)
            continue
        if c == '"':
            start = span(1)
            j = i + 1
            buf = []
            terminated = False
            while j < n:
                ch = text[j]
                if ch == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                    continue
                if ch == '"':
                    terminated = True
                    break
                if ch == "\n":
                    break
                buf.append(ch)
                j += 1
            if not terminated:
                diags.append(Diagnostic("error", path, start, "unterminated string"))
                advance(j - i)
                continue
            tokens.append(Token("string", "".join(buf), Span(line, col, j + 1 - i)))
            advance(j + 1 - i)
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            word = text[i:j]
            tokens.append(Token("float" if is_float else "int", word, span(j - i)))
            advance(j - i)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, span(j - i)))
            advance(j - i)
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, span(len(p))))
                advance(len(p))
                break
        else:
            diags.append(
                Diagnostic("error", path, span(1), f"unexpected character {c!r}")
            )
            advance(1)
    tokens.append(Token("eof", "", Span(line, col, 0)))
    return tokens, diags
