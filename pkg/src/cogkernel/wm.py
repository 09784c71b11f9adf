"""Working memory: the current-situation graph, buffers and substates.

Two disciplines share this class.  In ``actr`` mode every element lives in a
buffer: either on the buffer node itself (its slot chunk) or on a chunk held
by one of the buffer's fields.  In ``soar`` mode the graph is rooted in the
top state; anything that cannot be reached from some state is collected at
the end of the cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import kernels
from .core import (
    FIELD_WORDS,
    IMPASSE_WORDS,
    Element,
    MetaRecord,
    SymbolAtom,
    _status,
    format_triple,
    intern,
    is_agent_value,
    make_value,
    sym,
    triple_key,
)
from .errors import (
    CannotRemoveError,
    PlacementError,
    UnknownElementError,
    UnsupportedModeError,
    WallViolationError,
)

ACTR = "actr"
SOAR = "soar"

DEFAULT_ACTR_BUFFERS = ("goal", "imaginal", "retrieval", "blend", "visual", "manual")
DEFAULT_SOAR_BUFFERS = ("retrieval", "em", "input", "output")
PERCEPT_BUFFERS = ("visual", "input")
REWARD_BUFFER = "reward"

# provenance kinds
RULE = "rule"
RETRIEVAL = "retrieval"
PERCEPT = "percept"
ARCH = "architecture"
STATUS = "status"

STATUS_EDGE = sym("status")
HOLDING_FIELDS = frozenset(sym(f) for f in ("percept", "payload", "cue", "retrieved"))
FIELD_ATOMS = frozenset(sym(f) for f in FIELD_WORDS)
SUPERSTATE = intern("superstate")
IMPASSE = intern("impasse")
ITEM = intern("item")
OPERATOR = intern("operator")
NIL = intern("nil")
TOP_STATE = intern("S1")
BOOKKEEPING_EDGES = frozenset((SUPERSTATE, IMPASSE, ITEM))


@dataclass(frozen=True)
class Provenance:
    kind: str
    source: object = None  # instantiation id (rule) or cue element ids (retrieval)

    @classmethod
    def rule(cls, inst_id: int) -> "Provenance":
        return cls(RULE, inst_id)

    @classmethod
    def retrieval(cls, cue_ids: Iterable[int]) -> "Provenance":
        return cls(RETRIEVAL, tuple(cue_ids))


PERCEPT_PROV = Provenance(PERCEPT)
ARCH_PROV = Provenance(ARCH)
STATUS_PROV = Provenance(STATUS)


@dataclass
class ElementMeta(MetaRecord):
    created_at: int = 0
    accesses: list = field(default_factory=list)
    derivation: Optional[Provenance] = None
    level: Optional[SymbolAtom] = None


@dataclass
class CopyOf(MetaRecord):
    source: Optional[SymbolAtom] = None


@dataclass
class StateInfo:
    node: SymbolAtom
    depth: int
    created_at: int
    superstate: Optional[SymbolAtom] = None
    impasse: Optional[SymbolAtom] = None
    candidates: tuple = ()
    operator: Optional[SymbolAtom] = None
    operator_eid: Optional[int] = None
    # cue of the ONC impasse: the operator that could not be applied
    impasse_operator: Optional[SymbolAtom] = None


class Namer:
    """Deterministic generator of fresh node symbols for one agent run."""

    def __init__(self, used: Iterable[str] = ()) -> None:
        self.used = set(used)
        self.counter = 0

    def reserve(self, texts: Iterable[str]) -> None:
        self.used.update(texts)

    def fresh(self, prefix: str = "N") -> SymbolAtom:
        prefix = (prefix or "N")[0].upper()
        if not prefix.isalpha():
            prefix = "N"
        while True:
            self.counter += 1
            text = f"{prefix}{self.counter}"
            if text not in self.used:
                self.used.add(text)
                return intern(text)


@dataclass
class Buffer:
    name: SymbolAtom
    status: object  # ModuleStatus
    cue: object = None
    command: Optional[tuple] = None


class WorkingMemory:
    def __init__(self, mode: str = ACTR, buffers: Optional[Iterable[str]] = None,
                 namer: Optional[Namer] = None, now: int = 0) -> None:
        if mode not in (ACTR, SOAR):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.namer = namer or Namer()
        self.elements: dict[int, Element] = {}
        self.by_triple: dict = {}
        self.by_node: dict = {}
        self.by_node_edge: dict = {}
        self.by_edge: dict = {}
        self.meta: dict[int, ElementMeta] = {}
        self.kinds: dict[int, str] = {}
        self.copy_of: dict = {}
        self.states: list = []
        self.state_info: dict = {}
        # state -> {operator: None} for acceptable proposals; these link
        # proposed operator structures to their state
        self.pref_links: dict = {}
        self.version = 0
        self.on_add = None  # optional hook (eid, element, provenance, now)
        self._levels_cache = None
        self._levels_version = -1
        if buffers is None:
            buffers = DEFAULT_ACTR_BUFFERS if mode == ACTR else DEFAULT_SOAR_BUFFERS
        names = list(dict.fromkeys(list(buffers) + [REWARD_BUFFER]))
        self.buffers: dict = {}
        self.namer.reserve(names)
        if mode == SOAR:
            self.namer.reserve([TOP_STATE.text])
            self.states.append(TOP_STATE)
            self.state_info[TOP_STATE] = StateInfo(TOP_STATE, 0, now)
            self._insert(Element(TOP_STATE, SUPERSTATE, NIL), ARCH_PROV, now)
        for text in names:
            atom = intern(text)
            self.buffers[atom] = Buffer(atom, _status(text, "free"))
            if mode == SOAR:
                self._insert(Element(TOP_STATE, atom, atom), ARCH_PROV, now)
            self._insert(Element(atom, STATUS_EDGE, sym("free")), STATUS_PROV, now)

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, triple) -> bool:
        return triple in self.by_triple

    def find(self, triple) -> Optional[Element]:
        eid = self.by_triple.get(triple)
        return None if eid is None else self.elements[eid]

    def get(self, eid: int) -> Element:
        try:
            return self.elements[eid]
        except KeyError:
            raise UnknownElementError(f"no element #{eid}") from None

    def of_node(self, node) -> list:
        return list(self.by_node.get(node, {}).values())

    def values(self, node, edge) -> list:
        return [e.value for e in self.by_node_edge.get((node, edge), {}).values()]

    def triples(self) -> list:
        return sorted((e.triple for e in self.elements.values()), key=triple_key)

    def snapshot(self) -> frozenset:
        return frozenset(self.by_triple)

    def dump(self) -> str:
        return "".join(format_triple(t) + "\n" for t in self.triples())

    def is_status(self, eid: int) -> bool:
        return self.kinds.get(eid) == STATUS

    def is_percept(self, eid: int) -> bool:
        return self.kinds.get(eid) == PERCEPT

    def kind_of(self, eid: int) -> str:
        return self.kinds[eid]

    def is_bookkeeping(self, e: Element) -> bool:
        return e.node in self.state_info and self.kinds.get(e.id) == ARCH

    def buffer(self, name) -> Buffer:
        atom = name if isinstance(name, SymbolAtom) else sym(name)
        return self.buffers[atom]

    def field_value(self, buf, fld):
        b = self.buffer(buf).name
        vals = self.values(b, sym(fld) if isinstance(fld, str) else fld)
        return vals[0] if vals else None

    def held_nodes(self) -> set:
        held = set()
        for b in self.buffers:
            for f in HOLDING_FIELDS:
                for v in self.values(b, f):
                    if isinstance(v, SymbolAtom):
                        held.add(v)
        return held

    # -- mutation ----------------------------------------------------------

    def _insert(self, e: Element, prov: Provenance, now: int) -> int:
        t = e.triple
        existing = self.by_triple.get(t)
        if existing is not None:
            return existing
        eid = e.id
        self.elements[eid] = e
        self.by_triple[t] = eid
        self.by_node.setdefault(e.node, {})[eid] = e
        self.by_node_edge.setdefault((e.node, e.edge), {})[eid] = e
        self.by_edge.setdefault(e.edge, {})[eid] = e
        self.kinds[eid] = prov.kind
        if prov.kind not in (STATUS, PERCEPT):
            self.meta[eid] = ElementMeta(
                subject=eid,
                stamp=now,
                created_at=now,
                accesses=[now],
                derivation=prov if prov.kind in (RULE, RETRIEVAL) else None,
            )
        self.version += 1
        if self.on_add is not None:
            self.on_add(eid, e, prov, now)
        return eid

    def add(self, e, prov: Provenance, now: int) -> int:
        """Add an element (or a ``(node, edge, value)`` triple).

        Adding a triple that is already present returns the existing id.
        """
        if not isinstance(e, Element):
            node, edge, value = e
            e = Element(node, edge, make_value(value))
        if not (isinstance(e.node, SymbolAtom) and isinstance(e.edge, SymbolAtom)):
            raise TypeError("node and edge must be symbols")
        if not is_agent_value(e.value):
            raise TypeError(f"not an agent value: {e.value!r}")
        if e.edge is STATUS_EDGE and prov.kind != STATUS:
            raise WallViolationError(f"cannot write module status: {format_triple(e.triple)}")
        if self.mode == ACTR and prov.kind != STATUS:
            if e.node not in self.buffers and e.node not in self.held_nodes():
                raise PlacementError(
                    f"{format_triple(e.triple)} is not in any buffer"
                )
        return self._insert(e, prov, now)

    def remove(self, eid: int) -> Element:
        e = self.elements.pop(eid, None)
        if e is None:
            raise UnknownElementError(f"no element #{eid}")
        del self.by_triple[e.triple]
        self._unindex(self.by_node, e.node, eid)
        self._unindex(self.by_node_edge, (e.node, e.edge), eid)
        self._unindex(self.by_edge, e.edge, eid)
        self.meta.pop(eid, None)
        self.kinds.pop(eid, None)
        self.version += 1
        return e

    @staticmethod
    def _unindex(index: dict, key, eid: int) -> None:
        bucket = index.get(key)
        if bucket is not None:
            bucket.pop(eid, None)
            if not bucket:
                del index[key]

    def remove_triple(self, triple) -> Optional[Element]:
        eid = self.by_triple.get(triple)
        return None if eid is None else self.remove(eid)

    def touch(self, eid: int, now: int) -> None:
        m = self.meta.get(eid)
        if m is not None:
            m.accesses.append(now)
            m.stamp = now

    def set_status(self, buf, state: str, now: int) -> None:
        b = self.buffer(buf)
        for e in list(self.by_node_edge.get((b.name, STATUS_EDGE), {}).values()):
            self.remove(e.id)
        b.status = _status(b.name.text, state)
        self._insert(Element(b.name, STATUS_EDGE, b.status.atom), STATUS_PROV, now)

    def set_field(self, buf, fld: str, value, prov: Provenance, now: int) -> Optional[int]:
        b = self.buffer(buf)
        f = sym(fld)
        if f is STATUS_EDGE:
            raise WallViolationError("status is written with set_status")
        for e in list(self.by_node_edge.get((b.name, f), {}).values()):
            self.remove(e.id)
        if value is None:
            return None
        if self.mode == ACTR and f is sym("retrieved"):
            b.cue = None
        return self._insert(Element(b.name, f, make_value(value)), prov, now)

    def buffer_chunks(self, buf) -> list:
        """Triples in a buffer: its slot chunk plus chunks held in fields."""
        b = self.buffer(buf)
        out = [e.triple for e in self.of_node(b.name) if e.edge is not STATUS_EDGE]
        for f in HOLDING_FIELDS:
            for v in self.values(b.name, f):
                if isinstance(v, SymbolAtom) and v not in self.buffers:
                    out.extend(e.triple for e in self.of_node(v))
        return sorted(out, key=triple_key)

    def clear_buffer(self, buf) -> dict:
        """Empty a buffer (status untouched).  Returns the removed chunks as
        ``{node: [(edge, value), ...]}`` so the caller can store them."""
        b = self.buffer(buf)
        removed: dict = {}
        for e in list(self.of_node(b.name)):
            if e.edge is STATUS_EDGE:
                continue
            if e.edge in HOLDING_FIELDS and isinstance(e.value, SymbolAtom):
                held = e.value
                for he in self.of_node(held):
                    removed.setdefault(held, []).append((he.edge, he.value))
                    self.remove(he.id)
            elif e.edge not in FIELD_ATOMS:
                removed.setdefault(b.name, []).append((e.edge, e.value))
            self.remove(e.id)
        b.cue = None
        b.command = None
        return removed

    # -- linkage and substates ---------------------------------------------

    def _adjacency(self) -> dict:
        adj: dict = {}
        for e in self.elements.values():
            if isinstance(e.value, SymbolAtom):
                adj.setdefault(e.node, []).append(e.value)
        for state, ops in self.pref_links.items():
            adj.setdefault(state, []).extend(ops)
        return adj

    def levels(self) -> dict:
        """Map every linked node to the shallowest state it hangs from."""
        if self._levels_version == self.version and self._levels_cache is not None:
            return self._levels_cache
        adj = self._adjacency()
        level: dict = {}
        for state in self.states:
            if state in level:
                continue
            level[state] = state
            frontier = deque([state])
            while frontier:
                node = frontier.popleft()
                for nxt in adj.get(node, ()):
                    if nxt not in level:
                        level[nxt] = state
                        frontier.append(nxt)
        self._levels_cache = level
        self._levels_version = self.version
        return level

    def level_of(self, e) -> Optional[SymbolAtom]:
        node = e.node if isinstance(e, Element) else e
        return self.levels().get(node)

    def depth_of(self, state: Optional[SymbolAtom]) -> int:
        if state is None:
            return len(self.states)
        return self.state_info[state].depth

    def reachable_nodes(self) -> set:
        if self.mode == SOAR:
            return set(self.levels())
        reach = set(self.buffers)
        reach |= self.held_nodes()
        return reach

    def collect_orphans(self) -> list:
        """Remove elements whose node is no longer reachable.  Returns them."""
        reach = self.reachable_nodes()
        gone = [e for e in self.elements.values() if e.node not in reach]
        for e in gone:
            self.remove(e.id)
        if self.mode == SOAR:
            for e in gone:
                m = self.meta.get(e.id)
                if m is not None:
                    m.level = None
        return gone

    def refresh_levels(self, now: int) -> None:
        """Write substate-level metadata for every element (soar mode)."""
        if self.mode != SOAR:
            return
        lv = self.levels()
        for eid, m in self.meta.items():
            new = lv.get(self.elements[eid].node)
            if new is not m.level:
                m.level = new
                m.stamp = now

    @property
    def current_state(self) -> SymbolAtom:
        return self.states[-1]

    def create_substate(self, impasse, candidates: Iterable = (), now: int = 0,
                        impasse_operator=None) -> SymbolAtom:
        if self.mode != SOAR:
            raise UnsupportedModeError("substates exist only in soar mode")
        imp = impasse if isinstance(impasse, SymbolAtom) else sym(impasse)
        if imp.text not in IMPASSE_WORDS:
            raise ValueError(f"not an impasse type: {imp.text}")
        sup = self.states[-1]
        node = self.namer.fresh("S")
        cands = tuple(sorted(set(candidates), key=lambda a: a.text))
        self.states.append(node)
        self.state_info[node] = StateInfo(
            node, len(self.states) - 1, now, sup, imp, cands, impasse_operator=impasse_operator
        )
        self._insert(Element(node, SUPERSTATE, sup), ARCH_PROV, now)
        self._insert(Element(node, IMPASSE, imp), ARCH_PROV, now)
        for c in cands:
            self._insert(Element(node, ITEM, c), ARCH_PROV, now)
        return node

    def resolve_substate(self, state: SymbolAtom) -> int:
        """Remove ``state``, every deeper state and all their local elements.

        Elements also reachable from a shallower state (results) survive.
        Returns the number of elements removed.
        """
        if state not in self.state_info:
            raise UnknownElementError(f"{state} is not a state")
        depth = self.state_info[state].depth
        if depth == 0:
            raise CannotRemoveError("the top state cannot be removed")
        doomed = self.states[depth:]
        lv = self.levels()
        keep_states = set(self.states[:depth])
        victims = [
            e for e in self.elements.values()
            if lv.get(e.node) not in keep_states
        ]
        for e in victims:
            self.remove(e.id)
        for s in doomed:
            del self.state_info[s]
        del self.states[depth:]
        return len(victims)

    # -- forgetting ----------------------------------------------------------

    def forget(self, threshold: float, now: int, decay: float = 0.5,
               enabled: bool = True, floor_ms: float = 1.0) -> list:
        """Drop decayed elements (soar mode).  Buffer, status and state
        bookkeeping elements are exempt.  Returns removed ids."""
        if not enabled or self.mode != SOAR:
            return []
        out = []
        for eid in sorted(self.meta):
            e = self.elements[eid]
            if e.node in self.buffers or self.kinds[eid] == ARCH:
                continue
            if kernels.bla(self.meta[eid].accesses, now, decay, floor_ms) < threshold:
                out.append(eid)
        for eid in out:
            self.remove(eid)
        return out

    # -- invariants ----------------------------------------------------------

    def audit(self) -> list:
        """Return a list of invariant violations (empty when healthy)."""
        problems = []
        reach = self.reachable_nodes()
        for e in self.elements.values():
            if e.node not in reach:
                problems.append(f"unlinked {format_triple(e.triple)}")
            if not is_agent_value(e.value):
                problems.append(f"non-agent value in {e!r}")
        for eid in self.meta:
            if self.kinds.get(eid) in (STATUS, PERCEPT):
                problems.append(f"metadata kept for status/percept #{eid}")
        return problems
