"""Canonical pretty-printer.  ``parse(format_model(ast)).ast == ast``."""

from __future__ import annotations

from ..core import SymbolAtom, format_value
from ..procedural import HAND_WRITTEN, Clear, Command, Make, New, Prefer, Remove, Var
from .ast import KEYWORD_OF_ROLE, ModelAst
from .lexer import is_identifier

HEADER = "# cogkernel model v1"

_MARK = {"acceptable": "+", "reject": "-", "best": ">", "worst": "<", "better": ">",
         "worse": "<", "indifferent": "="}


def term(t) -> str:
    if isinstance(t, Var):
        return f"?{t.name}"
    return format_value(t)


def param_value(v) -> str:
    if isinstance(v, str) and is_identifier(v):
        return v
    return format_value(v)


def condition(c) -> str:
    body = f"({term(c.node)} ^{term(c.edge)} {term(c.value)}"
    for t in c.tests:
        body += f" {t.op} {term(t.operand)}"
    return ("-" if c.negative else "") + body + ")"


def _cue(cue) -> str:
    parts = []
    for edge, op, value in cue:
        if op == "present":
            parts.append(f"^{term(edge)} present")
        elif op == "=" and not (isinstance(value, SymbolAtom) and value.text == "present"):
            parts.append(f"^{term(edge)} {term(value)}")
        else:
            parts.append(f"^{term(edge)} {op} {term(value)}")
    return "{ " + " ".join(parts) + " }" if parts else "{ }"


def action(a) -> str:
    if isinstance(a, Make):
        return f"+({term(a.node)} ^{term(a.edge)} {term(a.value)})"
    if isinstance(a, Remove):
        return f"-({term(a.node)} ^{term(a.edge)} {term(a.value)})"
    if isinstance(a, New):
        return f"new {term(a.var)}"
    if isinstance(a, Clear):
        return f"clear {a.buffer}"
    if isinstance(a, Prefer):
        out = f"prefer {term(a.state)} {term(a.operator)} {_MARK[a.kind]}"
        if a.ref is not None:
            out += f" {term(a.ref)}"
        elif a.value is not None:
            out += f" {format_value(a.value)}"
        return out
    if isinstance(a, Command):
        n = a.name
        if n in ("retrieve", "retrieve-blend"):
            return f"!{n} {a.buffer} {_cue(a.cue)}"
        if n == "retrieve-name":
            out = f"!{n} {a.buffer} {term(a.args[0])}"
            return out + (f" depth {a.depth}" if a.depth else "")
        if n == "em-query":
            inner = " ".join(f"({term(x)} ^{term(y)} {term(z)})" for x, y, z in a.cue)
            return f"!{n} {a.buffer} {{ {inner} }}" if inner else f"!{n} {a.buffer} {{ }}"
        if n in ("em-next", "em-prev"):
            return f"!{n} {a.buffer}"
        if n == "store":
            return f"!store {term(a.args[0])}"
        if n == "motor":
            return f"!motor {a.buffer} (" + " ".join(term(x) for x in a.args) + ")"
        if n == "halt":
            return "!halt"
        out = f"!{n}"
        if a.buffer:
            out += f" {a.buffer}"
        if a.cue:
            out += f" {_cue(a.cue)}"
        return out
    raise TypeError(f"not an action: {a!r}")


def production(p, utility=None) -> str:
    lines = []
    if p.provenance != HAND_WRITTEN:
        note = f"# learned: {p.provenance}"
        if p.origin:
            note += f" from {p.origin}"
        lines.append(note)
    head = f"{KEYWORD_OF_ROLE[p.role]} {p.name}"
    if p.operator is not None:
        head += f" for {p.operator}"
    u = p.utility if utility is None else utility
    if u != 0.0:
        head += f" utility {format_value(float(u))}"
    if p.rl:
        head += " rl"
    if p.provenance != HAND_WRITTEN:
        head += f" learned {p.provenance}"
    lines.append(head + " {")
    lines.extend("  " + condition(c) for c in p.conditions)
    lines.append("  -->")
    lines.extend("  " + action(a) for a in p.actions)
    lines.append("}")
    return "\n".join(lines)


def format_model(ast: ModelAst, utilities=None) -> str:
    """Canonical text.  ``utilities`` optionally overrides printed rule
    utilities (used when writing learned rules back out)."""
    utilities = utilities or {}
    out = [HEADER, f"mode {ast.mode}"]
    if ast.buffers is not None:
        names = " ".join(b.name for b in ast.buffers)
        out.append(f"buffers {{ {names} }}" if names else "buffers { }")
    if ast.params:
        out.append("params {")
        out.extend(f"  {p.name} {param_value(p.value)}" for p in ast.params)
        out.append("}")
    if ast.wm:
        out.append("wm {")
        out.extend(f"  ({w.node.text} ^{w.edge.text} {format_value(w.value)})" for w in ast.wm)
        out.append("}")
    if ast.dm:
        out.append("dm {")
        for c in ast.dm:
            slots = " ".join(f"^{e.text} {format_value(v)}" for e, v in c.slots)
            out.append(f"  {c.name.text} {{ {slots} }}")
        out.append("}")
    if ast.env is not None:
        out.append(f"env {format_value(ast.env)}")
    for p in ast.productions:
        out.append("")
        out.append(production(p, utilities.get(p.name)))
    return "\n".join(out) + "\n"
