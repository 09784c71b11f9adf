"""Static checks on a parsed model.  Each violation is one diagnostic."""

from __future__ import annotations

import difflib

from ..core import COMMAND_WORDS, INNATE_TEXTS, SymbolAtom
from ..procedural import (
    APPLICATION,
    EVALUATION,
    I_SUPPORT_ROLES,
    PLAIN,
    PROPOSAL,
    Clear,
    Command,
    Make,
    New,
    Prefer,
    Remove,
    Var,
)
from .ast import ModelAst
from .lexer import Diagnostic

# Edge labels that name architecture metadata.  Rules may neither test nor
# write them.
METADATA_EDGES = frozenset((
    "activation", "base-level", "utility", "copy-of", "derivation",
    "substate-level", "association", "accesses", "created-at", "fired-at",
))

SOAR_ONLY_COMMANDS = frozenset(("retrieve-name", "em-query", "em-next", "em-prev"))
ACTR_ONLY_COMMANDS = frozenset(("retrieve-blend",))
BUFFER_COMMANDS = frozenset(("retrieve", "retrieve-blend", "retrieve-name", "em-query",
                             "em-next", "em-prev", "motor"))

KNOWN_PARAMS = frozenset((
    "seed", "max-cycles", "cycle-cost", "idle-wait",
    "egs", "alpha", "gamma", "init-utility", "temperature",
    "decay", "rt", "lf", "mas", "spread-depth", "blend-temperature", "ans", "mp",
    "partial-matching", "inhibition", "spontaneous", "spontaneous-threshold", "hop-decay",
    "compile", "chunk", "chunk-repetitions", "wm-forget", "wm-forget-threshold",
    "rule-forget", "rule-forget-threshold", "substate-limit", "elaboration-limit",
    "episodic",
))


def _err(msg: str, span, code: str) -> Diagnostic:
    return Diagnostic("error", msg, span, code)


def _edge_text(t):
    return t.text if isinstance(t, SymbolAtom) else None


def validate(ast: ModelAst) -> list:
    diags: list = []
    if ast is None:
        return diags
    mode = ast.mode
    buffers = set(ast.buffer_names()) | {"reward"}
    for b in ast.buffers or ():
        if b.name in INNATE_TEXTS:
            diags.append(_err(f"buffer name {b.name!r} is reserved vocabulary", b.span, "vocabulary"))
    for p in ast.params:
        if p.name not in KNOWN_PARAMS:
            close = difflib.get_close_matches(p.name, sorted(KNOWN_PARAMS), n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            diags.append(Diagnostic("warning", f"unknown parameter {p.name!r}{hint}", p.span, "param"))
    for w in ast.wm:
        if w.edge.text == "status":
            diags.append(_err("initial memory cannot set module status", w.span, "wall-violation"))
        elif w.edge.text in METADATA_EDGES:
            diags.append(_err(f"{w.edge.text!r} is architecture metadata, not agent data",
                              w.span, "wall-violation"))
        if mode == "actr" and w.node.text not in buffers:
            held = {v.text for x in ast.wm if isinstance(x.value, SymbolAtom) for v in [x.value]}
            if w.node.text not in held:
                diags.append(_err(f"element on {w.node.text!r} is not in any buffer", w.span, "placement"))
    for c in ast.dm:
        if c.name.text in INNATE_TEXTS:
            diags.append(_err(f"chunk name {c.name.text!r} is reserved vocabulary", c.span, "vocabulary"))
        for e, _ in c.slots:
            if e.text == "status" or e.text in METADATA_EDGES:
                diags.append(_err(f"chunk {c.name.text}: slot {e.text!r} is reserved for the architecture",
                                  c.span, "wall-violation"))
    for p in ast.productions:
        diags.extend(_check_production(p, mode, buffers))
    return diags


def _check_production(p, mode, buffers) -> list:
    out = []
    span = p.span
    role = p.role
    if mode == "actr" and role != PLAIN:
        out.append(_err(f"{p.name}: role {role!r} needs soar mode", span, "mode"))
    if mode == "soar" and role == PLAIN:
        out.append(_err(f"{p.name}: plain 'rule' is an ACT-R construct; use elaborate/propose/evaluate/apply",
                        span, "mode"))
    if role == APPLICATION and not p.operator:
        out.append(_err(f"{p.name}: 'apply' rules must name their operator with 'for'", span, "role"))
    if role != APPLICATION and p.operator:
        out.append(_err(f"{p.name}: only 'apply' rules take 'for'", span, "role"))
    if p.rl and mode == "soar" and role != EVALUATION:
        out.append(_err(f"{p.name}: rl is only allowed on evaluate rules in soar mode", span, "rl"))

    bound: set = set()
    for c in p.conditions:
        if not c.negative:
            for t in (c.node, c.edge, c.value):
                if isinstance(t, Var):
                    bound.add(t.name)
    for c in p.conditions:
        e = _edge_text(c.edge)
        if e in METADATA_EDGES:
            out.append(_err(f"{p.name}: conditions cannot read metadata {e!r}", c.span, "wall-violation"))
        local = set(bound)
        if c.negative:
            for t in (c.node, c.edge, c.value):
                if isinstance(t, Var):
                    local.add(t.name)
        for t in c.tests:
            if isinstance(t.operand, Var) and t.operand.name not in local:
                out.append(_err(f"{p.name}: test variable ?{t.operand.name} is never bound",
                                c.span, "unbound-variable"))

    known = set(bound)
    has_acceptable = False
    has_pref = False
    for a in p.actions:
        span_a = getattr(a, "span", None) or span
        if isinstance(a, New):
            known.add(a.var.name)
            continue
        for v in _action_vars(a):
            if v not in known:
                out.append(_err(f"{p.name}: variable ?{v} is used in an action but never bound",
                                span_a, "unbound-variable"))
        if isinstance(a, (Make, Remove)):
            e = _edge_text(a.edge)
            if e == "status":
                out.append(_err(f"{p.name}: rules cannot write module status", span_a, "wall-violation"))
            elif e in METADATA_EDGES:
                out.append(_err(f"{p.name}: rules cannot write metadata {e!r}", span_a, "wall-violation"))
            n = a.node
            if mode == "actr" and isinstance(n, SymbolAtom) and n.text not in buffers:
                out.append(_err(f"{p.name}: {n.text!r} is not a declared buffer", span_a, "undeclared-buffer"))
            if isinstance(a, Remove) and role in I_SUPPORT_ROLES:
                out.append(_err(f"{p.name}: {role} rules cannot remove elements", span_a, "role"))
        elif isinstance(a, Clear):
            if a.buffer not in buffers:
                out.append(_err(f"{p.name}: {a.buffer!r} is not a declared buffer", span_a, "undeclared-buffer"))
            if role in I_SUPPORT_ROLES:
                out.append(_err(f"{p.name}: {role} rules cannot clear buffers", span_a, "role"))
        elif isinstance(a, Command):
            out.extend(_check_command(p, a, mode, buffers, span_a))
        elif isinstance(a, Prefer):
            has_pref = True
            has_acceptable |= a.kind == "acceptable"
            if mode != "soar":
                out.append(_err(f"{p.name}: preferences need soar mode", span_a, "mode"))
            elif role == APPLICATION:
                out.append(_err(f"{p.name}: apply rules cannot make preferences", span_a, "role"))
    if mode == "soar":
        if role == PROPOSAL and not has_acceptable:
            out.append(_err(f"{p.name}: a propose rule must make an acceptable preference ('prefer ?s ?o +')",
                            span, "role"))
        if role == EVALUATION and not has_pref:
            out.append(_err(f"{p.name}: an evaluate rule must make a preference", span, "role"))
    return out


def _check_command(p, a: Command, mode, buffers, span) -> list:
    out = []
    if a.name not in COMMAND_WORDS:
        close = difflib.get_close_matches(a.name, COMMAND_WORDS, n=1)
        hint = f"; did you mean '!{close[0]}'?" if close else ""
        return [_err(f"{p.name}: unknown command '!{a.name}'{hint}", span, "unknown-command")]
    if mode == "actr" and a.name in SOAR_ONLY_COMMANDS:
        out.append(_err(f"{p.name}: '!{a.name}' needs soar mode", span, "mode"))
    if mode == "soar" and a.name in ACTR_ONLY_COMMANDS:
        out.append(_err(f"{p.name}: '!{a.name}' needs actr mode", span, "mode"))
    if a.name in BUFFER_COMMANDS and a.buffer not in buffers:
        out.append(_err(f"{p.name}: {a.buffer!r} is not a declared buffer", span, "undeclared-buffer"))
    if p.role in I_SUPPORT_ROLES:
        out.append(_err(f"{p.name}: {p.role} rules cannot issue commands", span, "role"))
    if a.name in ("retrieve", "retrieve-blend"):
        if not a.cue:
            out.append(_err(f"{p.name}: a retrieval cue needs at least one constraint", span, "cue"))
        for edge, _, _ in a.cue:
            e = _edge_text(edge)
            if e in METADATA_EDGES or e == "status":
                out.append(_err(f"{p.name}: cues cannot mention {e!r}", span, "wall-violation"))
    if a.name == "em-query" and not a.cue:
        out.append(_err(f"{p.name}: an episodic cue needs at least one element", span, "cue"))
    if a.name == "em-query":
        for _, edge, _ in a.cue:
            e = _edge_text(edge)
            if e in METADATA_EDGES:
                out.append(_err(f"{p.name}: cues cannot mention {e!r}", span, "wall-violation"))
    return out


def _action_vars(a) -> list:
    terms = []
    if isinstance(a, (Make, Remove)):
        terms = [a.node, a.edge, a.value]
    elif isinstance(a, Prefer):
        terms = [a.state, a.operator, a.ref]
    elif isinstance(a, Command):
        terms = list(a.args)
        for item in a.cue:
            terms.extend(item)
    return [t.name for t in terms if isinstance(t, Var)]


def has_errors(diags) -> bool:
    return any(d.severity == "error" for d in diags)
