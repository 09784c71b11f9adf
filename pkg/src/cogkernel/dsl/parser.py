"""Recursive-descent parser for ``.cogm`` models (LL(1) with one token of
lookahead; see ``docs/grammar.ebnf``).

The parser never raises on malformed input.  Errors become diagnostics and
parsing resumes at the next top-level keyword that starts a line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..core import sym
from ..procedural import (
    CHUNKED,
    COMPILED,
    HAND_WRITTEN,
    Clear,
    Command,
    Condition,
    Make,
    New,
    Prefer,
    Production,
    Remove,
    Test,
    Var,
)
from .ast import (
    ACTION_KEYWORDS,
    MODES,
    ROLE_KEYWORDS,
    SECTION_KEYWORDS,
    TOP_KEYWORDS,
    BufferDecl,
    ChunkDecl,
    ModelAst,
    ParamDecl,
    WmDecl,
)
from .lexer import Diagnostic, Span, Token, tokenize

TEST_OPS = ("!=", "<", ">", "<=", ">=")
CUE_OPS = ("=", "!=", "<", ">", "<=", ">=")
PREF_MARKS = {"+": "acceptable", "-": "reject", ">": "best", "<": "worst", "=": "indifferent"}
BINARY_PREF = {">": "better", "<": "worse", "=": "indifferent"}


class _Fail(Exception):
    pass


@dataclass
class ParseResult:
    ast: Optional[ModelAst]
    diagnostics: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


class _Parser:
    def __init__(self, tokens: list, diags: list, file: str) -> None:
        self.toks = tokens
        self.i = 0
        self.diags = diags
        self.file = file

    # -- token plumbing --------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def at_punct(self, *texts) -> bool:
        t = self.peek()
        return t.kind == "PUNCT" and t.text in texts

    def error(self, msg: str, span: Optional[Span] = None, code: str = "syntax") -> None:
        self.diags.append(Diagnostic("error", msg, span or self.peek().span, code))

    def fail(self, msg: str, span: Optional[Span] = None) -> None:
        self.error(msg, span)
        raise _Fail

    def describe(self, t: Token) -> str:
        return "end of file" if t.kind == "EOF" else repr(t.text)

    def expect_punct(self, text: str, opener: Optional[Token] = None) -> Token:
        t = self.peek()
        if t.kind == "PUNCT" and t.text == text:
            return self.advance()
        if t.kind == "EOF" and opener is not None:
            self.fail(f"unbalanced brace: '{opener.text}' is never closed", opener.span)
        self.fail(f"expected '{text}', found {self.describe(t)}")
        raise AssertionError  # unreachable

    def expect_ident(self, what: str) -> Token:
        t = self.peek()
        if t.kind == "IDENT":
            return self.advance()
        self.fail(f"expected {what}, found {self.describe(t)}")
        raise AssertionError

    def sync(self) -> None:
        self.advance()
        while True:
            t = self.peek()
            if t.kind == "EOF":
                return
            if t.kind == "IDENT" and t.text in TOP_KEYWORDS and t.line_start:
                return
            self.advance()

    def close_or_fail(self, opener: Token) -> None:
        if self.at("EOF"):
            self.fail(f"unbalanced brace: '{opener.text}' is never closed", opener.span)

    # -- terms -------------------------------------------------------------

    def constant(self, what: str = "a value"):
        t = self.peek()
        if t.kind == "IDENT":
            self.advance()
            return sym(t.text)
        if t.kind == "NUMBER":
            self.advance()
            return t.value
        if t.kind == "STRING":
            self.advance()
            return t.value
        self.fail(f"expected {what}, found {self.describe(t)}")

    def term(self, what: str = "a term"):
        t = self.peek()
        if t.kind == "VAR":
            self.advance()
            return Var(t.value)
        return self.constant(what)

    def symbol_term(self, what: str):
        t = self.peek()
        if t.kind == "VAR":
            self.advance()
            return Var(t.value)
        if t.kind == "IDENT":
            self.advance()
            return sym(t.text)
        self.fail(f"expected {what}, found {self.describe(t)}")

    # -- model -------------------------------------------------------------

    def model(self) -> ModelAst:
        ast = ModelAst(file=self.file, span=Span(self.file, 1, 1, 0))
        mode_seen: Optional[Token] = None
        rule_names: dict = {}
        chunk_names: dict = {}
        while not self.at("EOF"):
            t = self.peek()
            try:
                if t.kind == "IDENT" and t.text == "mode":
                    self.advance()
                    m = self.expect_ident("'actr' or 'soar'")
                    if m.text not in MODES:
                        self.error(f"unknown mode {m.text!r}; expected 'actr' or 'soar'", m.span)
                    elif mode_seen is not None:
                        self.error("mode declared twice", t.span, "duplicate-name")
                    else:
                        ast.mode = m.text
                        mode_seen = t
                elif t.kind == "IDENT" and t.text == "buffers":
                    self.advance()
                    ast.buffers = (ast.buffers or []) + self.buffers_block()
                elif t.kind == "IDENT" and t.text == "params":
                    self.advance()
                    ast.params.extend(self.params_block())
                elif t.kind == "IDENT" and t.text == "wm":
                    self.advance()
                    ast.wm.extend(self.wm_block())
                elif t.kind == "IDENT" and t.text == "dm":
                    self.advance()
                    for c in self.dm_block():
                        if c.name.text in chunk_names:
                            self.error(f"duplicate chunk name {c.name.text!r}", c.span, "duplicate-name")
                        else:
                            chunk_names[c.name.text] = c
                            ast.dm.append(c)
                elif t.kind == "IDENT" and t.text == "env":
                    self.advance()
                    s = self.peek()
                    if s.kind != "STRING":
                        self.fail(f"expected a quoted file name, found {self.describe(s)}")
                    self.advance()
                    ast.env = s.value
                elif t.kind == "IDENT" and t.text in ROLE_KEYWORDS:
                    p = self.production()
                    if p.name in rule_names:
                        self.error(f"duplicate rule name {p.name!r}", p.span, "duplicate-name")
                    else:
                        rule_names[p.name] = p
                        ast.productions.append(p)
                elif t.kind == "PUNCT" and t.text == "}":
                    self.error("unbalanced brace: '}' has no matching '{'", t.span)
                    self.advance()
                else:
                    expected = ", ".join(SECTION_KEYWORDS + tuple(ROLE_KEYWORDS))
                    self.fail(f"expected a section or rule ({expected}), found {self.describe(t)}")
            except _Fail:
                self.sync()
        if mode_seen is None:
            self.diags.append(Diagnostic("error", "missing 'mode actr' or 'mode soar'",
                                         Span(self.file, 1, 1, 0), "syntax"))
        return ast

    def buffers_block(self) -> list:
        opener = self.expect_punct("{")
        out = []
        while not self.at_punct("}"):
            self.close_or_fail(opener)
            t = self.expect_ident("a buffer name")
            out.append(BufferDecl(t.text, t.span))
        self.advance()
        return out

    def params_block(self) -> list:
        opener = self.expect_punct("{")
        out = []
        while not self.at_punct("}"):
            self.close_or_fail(opener)
            t = self.expect_ident("a parameter name")
            v = self.peek()
            if v.kind in ("NUMBER", "STRING", "IDENT"):
                self.advance()
                out.append(ParamDecl(t.text, v.value, t.span))
            else:
                self.fail(f"expected a value for parameter {t.text!r}, found {self.describe(v)}")
        self.advance()
        return out

    def wm_block(self) -> list:
        opener = self.expect_punct("{")
        out = []
        while not self.at_punct("}"):
            self.close_or_fail(opener)
            lp = self.expect_punct("(")
            node = self.expect_ident("a node symbol")
            self.expect_punct("^")
            edge = self.expect_ident("an edge label")
            value = self.constant()
            self.expect_punct(")", lp)
            out.append(WmDecl(sym(node.text), sym(edge.text), value, lp.span))
        self.advance()
        return out

    def dm_block(self) -> list:
        opener = self.expect_punct("{")
        out = []
        while not self.at_punct("}"):
            self.close_or_fail(opener)
            name = self.expect_ident("a chunk name")
            inner = self.expect_punct("{")
            slots = []
            while not self.at_punct("}"):
                self.close_or_fail(inner)
                self.expect_punct("^")
                edge = self.expect_ident("a slot name")
                slots.append((sym(edge.text), self.constant()))
            self.advance()
            if not slots:
                self.error(f"chunk {name.text!r} has no slots", name.span)
            out.append(ChunkDecl(sym(name.text), tuple(slots), name.span))
        self.advance()
        return out

    # -- productions -------------------------------------------------------

    def production(self) -> Production:
        kw = self.advance()
        name = self.expect_ident("a rule name")
        operator = None
        utility = 0.0
        rl = False
        provenance = HAND_WRITTEN
        while not self.at_punct("{"):
            t = self.peek()
            if t.kind == "IDENT" and t.text == "for":
                self.advance()
                operator = self.expect_ident("an operator name").text
            elif t.kind == "IDENT" and t.text == "utility":
                self.advance()
                n = self.peek()
                if n.kind != "NUMBER":
                    self.fail(f"expected a number after 'utility', found {self.describe(n)}")
                self.advance()
                utility = n.value
            elif t.kind == "IDENT" and t.text == "rl":
                self.advance()
                rl = True
            elif t.kind == "IDENT" and t.text == "learned":
                self.advance()
                how = self.expect_ident("'compiled' or 'chunked'")
                if how.text not in (COMPILED, CHUNKED):
                    self.fail(f"expected 'compiled' or 'chunked', found {how.text!r}", how.span)
                provenance = how.text
            else:
                self.fail(f"expected '{{' or a rule option (for, utility, rl, learned), found {self.describe(t)}")
        opener = self.advance()
        conds = []
        while not self.at_punct("-->"):
            self.close_or_fail(opener)
            if self.at_punct("}"):
                self.fail("rule body needs '-->' between conditions and actions")
            conds.append(self.condition())
        self.advance()
        actions = []
        while not self.at_punct("}"):
            self.close_or_fail(opener)
            actions.append(self.action())
        self.advance()
        return Production(name.text, ROLE_KEYWORDS[kw.text], tuple(conds), tuple(actions),
                          utility=utility, rl=rl, provenance=provenance, operator=operator,
                          span=name.span)

    def condition(self) -> Condition:
        start = self.peek()
        negative = False
        if self.at_punct("-"):
            self.advance()
            negative = True
        lp = self.expect_punct("(")
        node = self.symbol_term("a node")
        self.expect_punct("^")
        edge = self.symbol_term("an edge")
        value = self.term("a value")
        tests = []
        while self.at_punct(*TEST_OPS):
            op = self.advance().text
            tests.append(Test(op, self.term("a test operand")))
        self.expect_punct(")", lp)
        return Condition(node, edge, value, negative, tuple(tests), span=start.span)

    def triple_body(self):
        lp = self.expect_punct("(")
        node = self.symbol_term("a node")
        self.expect_punct("^")
        edge = self.symbol_term("an edge")
        value = self.term("a value")
        self.expect_punct(")", lp)
        return node, edge, value

    def action(self):
        t = self.peek()
        if t.kind == "PUNCT" and t.text == "+":
            self.advance()
            n, e, v = self.triple_body()
            return Make(n, e, v, span=t.span)
        if t.kind == "PUNCT" and t.text == "-":
            self.advance()
            n, e, v = self.triple_body()
            return Remove(n, e, v, span=t.span)
        if t.kind == "IDENT" and t.text == "new":
            self.advance()
            v = self.peek()
            if v.kind != "VAR":
                self.fail(f"expected a variable after 'new', found {self.describe(v)}")
            self.advance()
            return New(Var(v.value), span=t.span)
        if t.kind == "IDENT" and t.text == "clear":
            self.advance()
            return Clear(self.expect_ident("a buffer name").text, span=t.span)
        if t.kind == "IDENT" and t.text == "prefer":
            return self.prefer()
        if t.kind == "COMMAND":
            return self.command()
        self.fail(f"expected an action (+(...), -(...), new, clear, prefer, !command), found {self.describe(t)}")

    def prefer(self) -> Prefer:
        t = self.advance()
        state = self.symbol_term("a state")
        op = self.symbol_term("an operator")
        mark = self.peek()
        if not (mark.kind == "PUNCT" and mark.text in PREF_MARKS):
            self.fail(f"expected a preference mark (+ - > < =), found {self.describe(mark)}")
        self.advance()
        nxt = self.peek()
        if mark.text in BINARY_PREF:
            if nxt.kind == "VAR" or (nxt.kind == "IDENT" and nxt.text not in ACTION_KEYWORDS):
                ref = self.symbol_term("an operator")
                return Prefer(state, op, BINARY_PREF[mark.text], ref, span=t.span)
            if mark.text == "=" and nxt.kind == "NUMBER":
                self.advance()
                return Prefer(state, op, "indifferent", None, nxt.value, span=t.span)
        return Prefer(state, op, PREF_MARKS[mark.text], span=t.span)

    def buffer_name(self) -> str:
        return self.expect_ident("a buffer name").text

    def cue_block(self) -> tuple:
        opener = self.expect_punct("{")
        out = []
        while not self.at_punct("}"):
            self.close_or_fail(opener)
            self.expect_punct("^")
            edge = self.symbol_term("a slot name")
            if self.at("IDENT", "present"):
                self.advance()
                out.append((edge, "present", None))
            elif self.at_punct(*CUE_OPS):
                op = self.advance().text
                out.append((edge, op, self.term()))
            else:
                out.append((edge, "=", self.term()))
        self.advance()
        return tuple(out)

    def command(self) -> Command:
        t = self.advance()
        name = t.value
        if name in ("retrieve", "retrieve-blend"):
            buf = self.buffer_name()
            return Command(name, buf, (), self.cue_block(), span=t.span)
        if name == "retrieve-name":
            buf = self.buffer_name()
            target = self.symbol_term("a chunk name")
            depth = 0
            if self.at("IDENT", "depth"):
                self.advance()
                n = self.peek()
                if n.kind != "NUMBER" or n.value != int(n.value) or n.value < 0:
                    self.fail("expected a non-negative whole number after 'depth'")
                self.advance()
                depth = int(n.value)
            return Command(name, buf, (target,), (), depth, span=t.span)
        if name == "em-query":
            buf = self.buffer_name()
            opener = self.expect_punct("{")
            cue = []
            while not self.at_punct("}"):
                self.close_or_fail(opener)
                cue.append(self.triple_body())
            self.advance()
            return Command(name, buf, (), tuple(cue), span=t.span)
        if name in ("em-next", "em-prev"):
            return Command(name, self.buffer_name(), span=t.span)
        if name == "store":
            return Command(name, None, (self.symbol_term("a node"),), span=t.span)
        if name == "motor":
            buf = self.buffer_name()
            lp = self.expect_punct("(")
            args = []
            while not self.at_punct(")"):
                self.close_or_fail(lp)
                args.append(self.term("a motor argument"))
            self.advance()
            return Command(name, buf, tuple(args), span=t.span)
        if name == "halt":
            return Command(name, span=t.span)
        # unknown command: accept a generic shape so validation can report it
        buf = None
        if self.at("IDENT") and self.peek().text not in ACTION_KEYWORDS:
            buf = self.advance().text
        cue: tuple = ()
        if self.at_punct("{"):
            cue = self.cue_block()
        return Command(name, buf, (), cue, span=t.span)


def parse(text: Union[str, bytes], file: str = "<model>") -> ParseResult:
    """Parse model text.  Any input terminates with an AST and/or
    diagnostics; ``result.ok`` is false when there are errors."""
    try:
        if isinstance(text, (bytes, bytearray)):
            text = bytes(text).decode("utf-8", errors="replace")
        tokens, diags = tokenize(text, file)
        p = _Parser(tokens, diags, file)
        ast = p.model()
        return ParseResult(ast, diags)
    except RecursionError:
        return ParseResult(None, [Diagnostic("error", "input nests too deeply", Span(file, 1, 1), "syntax")])
