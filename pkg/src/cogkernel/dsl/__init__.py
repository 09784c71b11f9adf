"""The ``.cogm`` model language: parse, validate and print."""

from .ast import BufferDecl, ChunkDecl, ModelAst, ParamDecl, WmDecl
from .lexer import Diagnostic, Span, tokenize
from .parser import ParseResult, parse
from .printer import format_model
from .validate import has_errors, validate


def check(text, file: str = "<model>") -> tuple:
    """Parse and validate.  Returns ``(ast, diagnostics)``."""
    res = parse(text, file)
    diags = list(res.diagnostics)
    if res.ast is not None and res.ok:
        diags.extend(validate(res.ast))
    return res.ast, diags


__all__ = [
    "BufferDecl", "ChunkDecl", "ModelAst", "ParamDecl", "WmDecl", "Diagnostic", "Span",
    "tokenize", "ParseResult", "parse", "format_model", "validate", "has_errors", "check",
]
