"""Tokenizer for ``.cogm`` model files."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT VAR NUMBER STRING PUNCT COMMAND EOF
    text: str
    span: Span
    value: object = None
    line_start: bool = False


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    message: str
    span: Optional[Span] = None
    code: str = "syntax"

    def format(self) -> str:
        where = str(self.span) if self.span is not None else "<model>"
        return f"{where}: {self.severity}: {self.message}"


IDENT_RE = r"[A-Za-z_][A-Za-z0-9_\-]*"
NUMBER_RE = r"-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>-->)
  | (?P<number>""" + NUMBER_RE + r""")
  | (?P<var>\?""" + IDENT_RE + r""")
  | (?P<command>!""" + IDENT_RE + r""")
  | (?P<ident>""" + IDENT_RE + r""")
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct><=|>=|!=|[{}()^+\-<>=])
    """,
    re.VERBOSE,
)

IDENT_FULL = re.compile(IDENT_RE + r"\Z")


def is_identifier(text: str) -> bool:
    return bool(IDENT_FULL.match(text))


def tokenize(text: str, file: str = "<model>") -> tuple:
    """Return ``(tokens, diagnostics)``; never raises on bad input."""
    tokens: list = []
    diags: list = []
    pos = 0
    line = 1
    line_pos = 0
    fresh_line = True
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_pos + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                diags.append(Diagnostic("error", "unterminated string", Span(file, line, col), "lexical"))
                end = text.find("\n", pos)
                pos = n if end < 0 else end
                continue
            diags.append(Diagnostic("error", f"unexpected character {ch!r}", Span(file, line, col), "lexical"))
            pos += 1
            continue
        kind = m.lastgroup
        tok_text = m.group()
        span = Span(file, line, col, len(tok_text))
        pos = m.end()
        if kind == "nl":
            line += 1
            line_pos = pos
            fresh_line = True
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "number":
            # "-" glued to an identifier-like continuation is punctuation
            value: object = float(tok_text)
            tokens.append(Token("NUMBER", tok_text, span, value, fresh_line))
        elif kind == "var":
            tokens.append(Token("VAR", tok_text, span, tok_text[1:], fresh_line))
        elif kind == "command":
            tokens.append(Token("COMMAND", tok_text, span, tok_text[1:], fresh_line))
        elif kind == "ident":
            tokens.append(Token("IDENT", tok_text, span, tok_text, fresh_line))
        elif kind == "string":
            try:
                value = json.loads(tok_text)
            except ValueError:
                diags.append(Diagnostic("error", "bad string escape", span, "lexical"))
                value = tok_text[1:-1]
            tokens.append(Token("STRING", tok_text, span, value, fresh_line))
        elif kind == "arrow":
            tokens.append(Token("PUNCT", "-->", span, None, fresh_line))
        else:
            tokens.append(Token("PUNCT", tok_text, span, None, fresh_line))
        fresh_line = False
    tokens.append(Token("EOF", "", Span(file, line, pos - line_pos + 1, 0), None, True))
    return tokens, diags
