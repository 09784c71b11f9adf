"""Universal data model: symbols, elements, chunks and graph reachability.

Everything an agent knows is an :class:`Element` triple ``(node, edge,
value)``.  Elements sharing a node form a :class:`Chunk`.  Alongside agent
data the architecture keeps metadata (:class:`MetaRecord` subclasses) and
module status (:class:`ModuleStatus`); neither is reachable from rule
conditions or actions.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import (
    EmptyChunkError,
    HeterogeneousNodeError,
    VocabularyCollisionError,
    WallViolationError,
)

USER = "user"
INNATE = "innate"

STATUS_WORDS = ("free", "busy", "success", "failure")
FIELD_WORDS = ("percept", "command", "payload", "cue", "retrieved", "status")
IMPASSE_WORDS = ("state-no-change", "tie", "conflict", "operator-no-change")
COMMAND_WORDS = (
    "retrieve",
    "retrieve-blend",
    "retrieve-name",
    "em-query",
    "em-next",
    "em-prev",
    "store",
    "motor",
    "halt",
)
INNATE_TEXTS = frozenset(STATUS_WORDS + FIELD_WORDS + IMPASSE_WORDS + COMMAND_WORDS)


class SymbolAtom:
    """An interned symbol.  Compare with ``is``; there is one atom per text."""

    __slots__ = ("text", "kind")

    def __init__(self, text: str, kind: str) -> None:
        object.__setattr__(self, "text", text)
        object.__setattr__(self, "kind", kind)

    def __setattr__(self, name, value):
        raise AttributeError("SymbolAtom is immutable")

    def __repr__(self) -> str:
        return self.text

    def __lt__(self, other: "SymbolAtom") -> bool:
        return self.text < other.text

    def __reduce__(self):
        return (sym, (self.text,))


_TABLE: dict[str, SymbolAtom] = {}


def _seed_innate() -> None:
    for text in sorted(INNATE_TEXTS):
        _TABLE[text] = SymbolAtom(text, INNATE)


_seed_innate()


def intern(text: str, kind: str = USER) -> SymbolAtom:
    """Return the canonical atom for ``text``.

    Raises :class:`VocabularyCollisionError` when a user symbol would shadow
    the innate vocabulary, or when a non-vocabulary text is requested as
    innate.
    """
    if not isinstance(text, str) or not text:
        raise ValueError("symbol text must be a nonempty string")
    if kind == USER:
        if text in INNATE_TEXTS:
            raise VocabularyCollisionError(f"{text!r} is innate vocabulary")
    elif kind == INNATE:
        if text not in INNATE_TEXTS:
            raise VocabularyCollisionError(f"{text!r} is not innate vocabulary")
        return _TABLE[text]
    else:
        raise ValueError(f"unknown symbol kind {kind!r}")
    atom = _TABLE.get(text)
    if atom is None:
        atom = _TABLE[text] = SymbolAtom(text, USER)
    return atom


def sym(text: str) -> SymbolAtom:
    """Lenient lookup: innate atom if the text is vocabulary, else a user atom."""
    atom = _TABLE.get(text)
    if atom is not None:
        return atom
    return intern(text, USER)


def is_innate(value) -> bool:
    return isinstance(value, SymbolAtom) and value.kind == INNATE


# Agent values: a symbol (which may name a node), a 64-bit real, or a string.
Value = Union[SymbolAtom, float, str]


def make_value(x) -> Value:
    if isinstance(x, SymbolAtom):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not agent values")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        return x
    raise TypeError(f"not an agent value: {x!r}")


def value_key(v) -> tuple:
    """Total order over values: symbols, then numbers, then strings."""
    if isinstance(v, SymbolAtom):
        return (0, v.text)
    if isinstance(v, float):
        return (1, v)
    return (2, v)


def format_number(x: float) -> str:
    if math.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_value(v) -> str:
    if isinstance(v, SymbolAtom):
        return v.text
    if isinstance(v, float):
        return format_number(v)
    return json.dumps(v, ensure_ascii=False)


Triple = tuple  # (SymbolAtom, SymbolAtom, Value)


def triple_key(t: Triple) -> tuple:
    return (t[0].text, t[1].text, value_key(t[2]))


def format_triple(t: Triple) -> str:
    return f"({t[0].text} ^{t[1].text} {format_value(t[2])})"


_element_ids = itertools.count(1)


@dataclass(frozen=True, eq=False, slots=True)
class Element:
    node: SymbolAtom
    edge: SymbolAtom
    value: Value
    id: int = field(default_factory=lambda: next(_element_ids))

    @property
    def triple(self) -> Triple:
        return (self.node, self.edge, self.value)

    def __repr__(self) -> str:
        return f"#{self.id}{format_triple(self.triple)}"


def element(node, edge, value) -> Element:
    """Build an element from texts or atoms (texts are looked up leniently)."""
    n = node if isinstance(node, SymbolAtom) else sym(node)
    e = edge if isinstance(edge, SymbolAtom) else sym(edge)
    return Element(n, e, make_value(value))


@dataclass(frozen=True)
class Chunk:
    name: SymbolAtom
    elements: frozenset

    @property
    def content(self) -> frozenset:
        return frozenset((e.edge, e.value) for e in self.elements)

    def slots(self) -> dict:
        out: dict = {}
        for e in sorted(self.elements, key=lambda x: triple_key(x.triple)):
            out.setdefault(e.edge, []).append(e.value)
        return out

    def triples(self) -> list:
        return sorted((e.triple for e in self.elements), key=triple_key)

    def __len__(self) -> int:
        return len(self.elements)


def assemble_chunk(elements: Iterable[Element]) -> Chunk:
    elements = frozenset(elements)
    if not elements:
        raise EmptyChunkError("a chunk needs at least one element")
    nodes = {e.node for e in elements}
    if len(nodes) != 1:
        names = sorted(n.text for n in nodes)
        raise HeterogeneousNodeError(f"elements span several nodes: {names}")
    return Chunk(next(iter(nodes)), elements)


def linked(graph: Iterable, root: SymbolAtom, target: SymbolAtom) -> tuple[bool, Optional[int]]:
    """Is ``target`` reachable from ``root`` along node -> symbol-value edges?

    Returns ``(found, depth)`` where depth is the shortest path length, or
    ``(False, None)``.
    """
    if root is target:
        return True, 0
    adj: dict = {}
    for e in graph:
        node, _, value = e.triple if isinstance(e, Element) else e
        if isinstance(value, SymbolAtom):
            adj.setdefault(node, []).append(value)
    seen = {root}
    frontier = deque([(root, 0)])
    while frontier:
        node, d = frontier.popleft()
        for nxt in adj.get(node, ()):
            if nxt is target:
                return True, d + 1
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, d + 1))
    return False, None


# -- architecture-owned data ------------------------------------------------

_ARCH = object()


class ModuleStatus:
    """Meta-process data written by a module into its buffer."""

    __slots__ = ("module", "state", "detail")

    def __init__(self, module: str, state: str, detail: Optional[SymbolAtom] = None, *, _token=None):
        if _token is not _ARCH:
            raise WallViolationError("module status can only be created by the architecture")
        if state not in STATUS_WORDS:
            raise ValueError(f"bad status {state!r}")
        if detail is not None and not is_innate(detail):
            raise ValueError("status detail must be an innate symbol")
        self.module = module
        self.state = state
        self.detail = detail

    @property
    def atom(self) -> SymbolAtom:
        return _TABLE[self.state]

    def __repr__(self) -> str:
        return f"ModuleStatus({self.module}, {self.state})"


def _status(module: str, state: str, detail=None) -> ModuleStatus:
    """Architecture-side constructor."""
    return ModuleStatus(module, state, detail, _token=_ARCH)


@dataclass
class MetaRecord:
    """Base for architecture metadata.  ``stamp`` is the simulated ms of the
    last mutation."""

    subject: object
    stamp: int = 0

    def touch_stamp(self, now: int) -> None:
        self.stamp = now


AGENT_DATA = "agent-data"
METADATA = "metadata"
STATUS = "status"


def classify(obj) -> str:
    """Place a datum in the three-way partition, or raise TypeError."""
    if isinstance(obj, ModuleStatus):
        return STATUS
    if isinstance(obj, MetaRecord):
        return METADATA
    if isinstance(obj, (Element, Chunk)):
        return AGENT_DATA
    # productions are agent data too; imported lazily to avoid a cycle
    from .procedural import Production

    if isinstance(obj, Production):
        return AGENT_DATA
    raise TypeError(f"datum outside the partition: {type(obj).__name__}")


def is_agent_value(v) -> bool:
    return isinstance(v, (SymbolAtom, float, str)) and not isinstance(v, bool)
