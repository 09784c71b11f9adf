"""Model syntax tree.  Rule bodies reuse the runtime rule types from
:mod:`cogkernel.procedural`; spans never take part in equality."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..core import SymbolAtom

MODES = ("actr", "soar")

ROLE_KEYWORDS = {
    "rule": "plain",
    "elaborate": "elaboration",
    "propose": "proposal",
    "evaluate": "evaluation",
    "apply": "application",
}
KEYWORD_OF_ROLE = {v: k for k, v in ROLE_KEYWORDS.items()}
SECTION_KEYWORDS = ("mode", "buffers", "params", "wm", "dm", "env")
TOP_KEYWORDS = frozenset(SECTION_KEYWORDS) | frozenset(ROLE_KEYWORDS)
ACTION_KEYWORDS = frozenset(("new", "clear", "prefer"))


@dataclass
class BufferDecl:
    name: str
    span: object = field(default=None, compare=False, repr=False)


@dataclass
class ParamDecl:
    name: str
    value: object
    span: object = field(default=None, compare=False, repr=False)


@dataclass
class WmDecl:
    node: SymbolAtom
    edge: SymbolAtom
    value: object
    span: object = field(default=None, compare=False, repr=False)

    @property
    def triple(self) -> tuple:
        return (self.node, self.edge, self.value)


@dataclass
class ChunkDecl:
    name: SymbolAtom
    slots: tuple  # ((edge, value), ...)
    span: object = field(default=None, compare=False, repr=False)


@dataclass
class ModelAst:
    mode: Optional[str] = None
    buffers: Optional[list] = None  # None: the mode's default buffers
    params: list = field(default_factory=list)
    wm: list = field(default_factory=list)
    dm: list = field(default_factory=list)
    productions: list = field(default_factory=list)
    env: Optional[str] = None
    file: str = field(default="<model>", compare=False)
    span: object = field(default=None, compare=False, repr=False)

    def param(self, name: str, default=None):
        for p in reversed(self.params):
            if p.name == name:
                return p.value
        return default

    def buffer_names(self) -> list:
        from ..wm import DEFAULT_ACTR_BUFFERS, DEFAULT_SOAR_BUFFERS

        if self.buffers is not None:
            return [b.name for b in self.buffers]
        return list(DEFAULT_ACTR_BUFFERS if self.mode != "soar" else DEFAULT_SOAR_BUFFERS)
