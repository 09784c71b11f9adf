"""Scripted environment: a deterministic table of motor responses plus
timed percepts and rewards.

Script lines (``#`` starts a comment)::

    on motor press a latency 200 status success percept visual { ^light on }
    at 300 percept visual { ^color red ^size 2 }
    at 500 reward 5
    at 900 halt
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import format_value, sym
from .dsl.lexer import tokenize
from .errors import CogKernelError, UnknownEnvironmentResponse


class EnvScriptError(CogKernelError):
    pass


@dataclass(frozen=True)
class MotorResponse:
    latency: int
    status: str
    percept: Optional[tuple] = None  # (buffer, ((edge, value), ...))


@dataclass(frozen=True)
class TimedEvent:
    at: int
    kind: str  # percept | reward | halt
    buffer: Optional[str] = None
    slots: tuple = ()
    amount: float = 0.0


@dataclass
class EnvScript:
    responses: dict = field(default_factory=dict)
    timed: list = field(default_factory=list)

    def respond(self, args: tuple) -> MotorResponse:
        key = motor_key(args)
        try:
            return self.responses[key]
        except KeyError:
            raise UnknownEnvironmentResponse(f"environment has no response to motor command {key!r}") from None


def motor_key(args) -> str:
    return " ".join(format_value(a) for a in args)


class _Lines:
    def __init__(self, toks, line_no, file):
        self.toks = toks
        self.i = 0
        self.line_no = line_no
        self.file = file

    def error(self, msg):
        raise EnvScriptError(f"{self.file}:{self.line_no}: {msg}")

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is None:
            self.error("unexpected end of line")
        self.i += 1
        return t

    def word(self, expected=None):
        t = self.next()
        if t.kind != "IDENT" or (expected is not None and t.text != expected):
            self.error(f"expected {expected or 'a word'}, found {t.text!r}")
        return t.text

    def number(self):
        t = self.next()
        if t.kind != "NUMBER":
            self.error(f"expected a number, found {t.text!r}")
        return t.value

    def value(self):
        t = self.next()
        if t.kind == "IDENT":
            return sym(t.text)
        if t.kind in ("NUMBER", "STRING"):
            return t.value
        self.error(f"expected a value, found {t.text!r}")

    def slots(self):
        t = self.next()
        if t.text != "{":
            self.error("expected '{'")
        out = []
        while True:
            t = self.next()
            if t.text == "}":
                return tuple(out)
            if t.text != "^":
                self.error("expected '^slot value' or '}'")
            edge = sym(self.word())
            out.append((edge, self.value()))


def parse_env(text: str, file: str = "<env>") -> EnvScript:
    script = EnvScript()
    for n, raw in enumerate(text.splitlines(), 1):
        toks, diags = tokenize(raw, file)
        if diags:
            raise EnvScriptError(f"{file}:{n}: {diags[0].message}")
        toks = [t for t in toks if t.kind != "EOF"]
        if not toks:
            continue
        ln = _Lines(toks, n, file)
        head = ln.word()
        if head == "on":
            ln.word("motor")
            args = []
            while ln.peek() is not None and not (ln.peek().kind == "IDENT" and ln.peek().text == "latency"):
                args.append(ln.value())
            ln.word("latency")
            latency = ln.number()
            ln.word("status")
            status = ln.word()
            if status not in ("success", "failure"):
                ln.error("motor status must be success or failure")
            percept = None
            if ln.peek() is not None:
                ln.word("percept")
                buf = ln.word()
                percept = (buf, ln.slots())
            if ln.peek() is not None:
                ln.error(f"unexpected {ln.peek().text!r}")
            if latency < 0:
                ln.error("latency must be non-negative")
            script.responses[motor_key(args)] = MotorResponse(int(latency), status, percept)
        elif head == "at":
            at = ln.number()
            if at < 0:
                ln.error("time must be non-negative")
            kind = ln.word()
            if kind == "percept":
                buf = ln.word()
                script.timed.append(TimedEvent(int(at), "percept", buf, ln.slots()))
            elif kind == "reward":
                script.timed.append(TimedEvent(int(at), "reward", amount=ln.number()))
            elif kind == "halt":
                script.timed.append(TimedEvent(int(at), "halt"))
            else:
                ln.error(f"unknown event {kind!r}; expected percept, reward or halt")
            if ln.peek() is not None:
                ln.error(f"unexpected {ln.peek().text!r}")
        else:
            ln.error(f"lines start with 'on' or 'at', not {head!r}")
    return script


def load_env(path) -> EnvScript:
    with open(path, encoding="utf-8") as f:
        return parse_env(f.read(), str(path))
