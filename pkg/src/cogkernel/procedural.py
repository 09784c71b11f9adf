"""Procedural memory: rules, matching, selection and firing.

ACT-R mode picks one instantiation per cycle by noisy utility.  Soar mode
runs elaboration waves to quiescence under justification support, decides
on an operator from preferences, and fires that operator's application
rules in parallel waves.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from . import kernels
from .core import (
    COMMAND_WORDS,
    MetaRecord,
    SymbolAtom,
    format_triple,
    is_agent_value,
    sym,
    triple_key,
)
from .declarative import CueTest, logistic_noise
from .errors import RunawayElaborationError
from .wm import ARCH_PROV, OPERATOR, Provenance, SOAR

log = logging.getLogger(__name__)

PLAIN = "plain"
ELABORATION = "elaboration"
PROPOSAL = "proposal"
EVALUATION = "evaluation"
APPLICATION = "application"
ROLES = (PLAIN, ELABORATION, PROPOSAL, EVALUATION, APPLICATION)
I_SUPPORT_ROLES = (ELABORATION, PROPOSAL, EVALUATION)

HAND_WRITTEN = "hand-written"
COMPILED = "compiled"
CHUNKED = "chunked"

NAME = sym("name")

ACCEPTABLE = "acceptable"
REJECT = "reject"
BETTER = "better"
WORSE = "worse"
BEST = "best"
WORST = "worst"
INDIFFERENT = "indifferent"
PREFERENCE_KINDS = (ACCEPTABLE, REJECT, BETTER, WORSE, BEST, WORST, INDIFFERENT)

RUNAWAY_LIMIT = 100


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return f"?{self.name}"


Term = Union[Var, SymbolAtom, float, str]


@dataclass(frozen=True)
class Test:
    op: str  # != < > <= >=
    operand: Term


@dataclass(frozen=True)
class Condition:
    node: Term
    edge: Term
    value: Term
    negative: bool = False
    tests: tuple = ()
    span: object = field(default=None, compare=False, repr=False)

    def variables(self) -> list:
        out = [t.name for t in (self.node, self.edge, self.value) if isinstance(t, Var)]
        out += [t.operand.name for t in self.tests if isinstance(t.operand, Var)]
        return out


@dataclass(frozen=True)
class Make:
    node: Term
    edge: Term
    value: Term
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Remove:
    node: Term
    edge: Term
    value: Term
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class New:
    var: Var
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Clear:
    buffer: str
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Command:
    """A module command.  ``cue`` holds ``(edge, op, value)`` tests for the
    retrieve family and ``(node, edge, value)`` triples for ``em-query``."""

    name: str
    buffer: Optional[str] = None
    args: tuple = ()
    cue: tuple = ()
    depth: int = 0
    span: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Prefer:
    state: Term
    operator: Term
    kind: str
    ref: Optional[Term] = None
    value: Optional[float] = None
    span: object = field(default=None, compare=False, repr=False)


Action = Union[Make, Remove, New, Clear, Command, Prefer]


@dataclass
class Production:
    name: str
    role: str = PLAIN
    conditions: tuple = ()
    actions: tuple = ()
    utility: float = 0.0
    rl: bool = False
    provenance: str = HAND_WRITTEN
    operator: Optional[str] = None
    origin: str = field(default="", compare=False)
    span: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"bad role {self.role!r}")
        self.conditions = tuple(self.conditions)
        self.actions = tuple(self.actions)

    def structure(self) -> tuple:
        return (self.role, self.operator, self.conditions, self.actions)


@dataclass
class RuleMeta(MetaRecord):
    utility: float = 0.0
    firings: list = field(default_factory=list)
    created_at: int = 0
    enabled: bool = True
    learn_count: int = 1
    last_reward_at: Optional[int] = None


class ProceduralMemory:
    def __init__(self) -> None:
        self.rules: dict = {}
        self.meta: dict = {}

    def __len__(self) -> int:
        return len(self.rules)

    def __contains__(self, name) -> bool:
        return name in self.rules

    def __getitem__(self, name) -> Production:
        return self.rules[name]

    def add(self, prod: Production, now: int = 0, enabled: bool = True) -> None:
        self.rules[prod.name] = prod
        self.meta[prod.name] = RuleMeta(prod.name, now, prod.utility, [], now, enabled)

    def remove(self, name: str) -> None:
        del self.rules[name]
        del self.meta[name]

    def utility(self, name: str) -> float:
        return self.meta[name].utility

    def set_utility(self, name: str, value: float, now: int) -> None:
        m = self.meta[name]
        m.utility = value
        m.stamp = now

    def active(self, roles: Optional[Iterable] = None) -> list:
        roles = set(roles) if roles is not None else None
        return [
            self.rules[n] for n in sorted(self.rules)
            if self.meta[n].enabled and (roles is None or self.rules[n].role in roles)
        ]

    def meta_records(self):
        yield from self.meta.values()


# -- matching ----------------------------------------------------------------

def _same(a, b) -> bool:
    if isinstance(a, SymbolAtom) or isinstance(b, SymbolAtom):
        return a is b
    return type(a) is type(b) and a == b


def _compare(op: str, a, b) -> bool:
    if op == "!=":
        return not _same(a, b)
    if not (isinstance(a, float) and isinstance(b, float)):
        return False
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    raise ValueError(f"bad test operator {op!r}")


def _resolve(term, bindings: dict):
    if isinstance(term, Var):
        return bindings.get(term.name, _UNBOUND)
    return term


_UNBOUND = object()


def _bind(term, value, bindings: dict) -> bool:
    if isinstance(term, Var):
        cur = bindings.get(term.name, _UNBOUND)
        if cur is _UNBOUND:
            bindings[term.name] = value
            return True
        return _same(cur, value)
    return _same(term, value)


def _tests_ok(cond: Condition, bindings: dict, final: bool) -> bool:
    if not cond.tests:
        return True
    subj = _resolve(cond.value, bindings)
    if subj is _UNBOUND:
        return not final
    for t in cond.tests:
        opnd = _resolve(t.operand, bindings)
        if opnd is _UNBOUND:
            if final:
                return False
            continue
        if not _compare(t.op, subj, opnd):
            return False
    return True


def _candidates(wm, cond: Condition, bindings: dict):
    node = _resolve(cond.node, bindings)
    edge = _resolve(cond.edge, bindings)
    if node is not _UNBOUND and not isinstance(node, SymbolAtom):
        return ()
    if edge is not _UNBOUND and not isinstance(edge, SymbolAtom):
        return ()
    if node is not _UNBOUND and edge is not _UNBOUND:
        return wm.by_node_edge.get((node, edge), {}).values()
    if node is not _UNBOUND:
        return wm.by_node.get(node, {}).values()
    if edge is not _UNBOUND:
        return wm.by_edge.get(edge, {}).values()
    return wm.elements.values()


def _unify(cond: Condition, e, bindings: dict) -> Optional[dict]:
    b = dict(bindings)
    if not _bind(cond.node, e.node, b):
        return None
    if not _bind(cond.edge, e.edge, b):
        return None
    if not _bind(cond.value, e.value, b):
        return None
    return b


def _negative_holds(wm, cond: Condition, bindings: dict) -> bool:
    for e in _candidates(wm, cond, bindings):
        b = _unify(cond, e, bindings)
        if b is not None and _tests_ok(cond, b, final=True):
            return False
    return True


@dataclass
class Instantiation:
    production: Production
    bindings: dict
    tested: tuple
    tested_triples: tuple
    id: int = 0
    fired_at: Optional[int] = None

    @property
    def key(self) -> tuple:
        return (self.production.name, self.tested)

    @property
    def name(self) -> str:
        return self.production.name

    def sort_key(self) -> tuple:
        return (self.production.name, tuple(triple_key(t) for t in self.tested_triples))

    def binding_items(self) -> list:
        return sorted(self.bindings.items())


def match_production(wm, prod: Production) -> list:
    pos = [c for c in prod.conditions if not c.negative]
    neg = [c for c in prod.conditions if c.negative]
    out = []

    def rec(i: int, bindings: dict, tested: list) -> None:
        if i == len(pos):
            for c in pos:
                if not _tests_ok(c, bindings, final=True):
                    return
            for c in neg:
                if not _negative_holds(wm, c, bindings):
                    return
            elems = [wm.elements[eid] for eid in tested]
            out.append(Instantiation(prod, bindings, tuple(tested), tuple(e.triple for e in elems)))
            return
        c = pos[i]
        for e in list(_candidates(wm, c, bindings)):
            b = _unify(c, e, bindings)
            if b is None or not _tests_ok(c, b, final=False):
                continue
            tested.append(e.id)
            rec(i + 1, b, tested)
            tested.pop()

    if not pos:
        bindings: dict = {}
        if all(_negative_holds(wm, c, bindings) for c in neg):
            out.append(Instantiation(prod, {}, (), ()))
        return out
    rec(0, {}, [])
    return out


def match(wm, productions: Iterable[Production], roles: Optional[Iterable] = None) -> list:
    """Every consistent instantiation, in deterministic order."""
    roles = set(roles) if roles is not None else None
    out = []
    for p in productions:
        if roles is None or p.role in roles:
            out.extend(match_production(wm, p))
    out.sort(key=Instantiation.sort_key)
    return out


def still_matches(wm, inst: Instantiation) -> bool:
    for eid, t in zip(inst.tested, inst.tested_triples):
        e = wm.elements.get(eid)
        if e is None or e.triple != t:
            return False
    for c in inst.production.conditions:
        if c.negative and not _negative_holds(wm, c, inst.bindings):
            return False
    return True


# -- ACT-R selection -----------------------------------------------------------

def select_actr(candidates: list, rng: random.Random, s: float, utilities) -> Optional[Instantiation]:
    """Pick the candidate with the largest ``utility + logistic noise``.

    ``utilities`` maps production name to utility (a dict or a callable).
    Ties resolve to the earliest candidate in sorted order.
    """
    if not candidates:
        return None
    get = utilities if callable(utilities) else utilities.__getitem__
    best, best_u = None, -math.inf
    for inst in sorted(candidates, key=Instantiation.sort_key):
        u = get(inst.name) + logistic_noise(rng, s)
        if u > best_u:
            best, best_u = inst, u
    return best


# -- firing --------------------------------------------------------------------

@dataclass(frozen=True)
class ResolvedCommand:
    name: str
    buffer: Optional[SymbolAtom]
    args: tuple = ()
    cue: tuple = ()
    depth: int = 0
    source: int = 0  # instantiation id


@dataclass(frozen=True)
class Preference:
    state: SymbolAtom
    operator: SymbolAtom
    kind: str
    ref: Optional[SymbolAtom] = None
    value: Optional[float] = None
    rule: Optional[str] = None
    source: int = field(default=0, compare=False)  # instantiation id


@dataclass
class Plan:
    inst: Instantiation
    bindings: dict = field(default_factory=dict)
    makes: list = field(default_factory=list)
    removes: list = field(default_factory=list)
    clears: list = field(default_factory=list)
    commands: list = field(default_factory=list)
    preferences: list = field(default_factory=list)


@dataclass
class Delta:
    added: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    commands: list = field(default_factory=list)
    preferences: list = field(default_factory=list)
    cleared: list = field(default_factory=list)  # (buffer, {node: content})
    conflicts: list = field(default_factory=list)
    plan: Optional[Plan] = None

    def extend(self, other: "Delta") -> None:
        self.added += other.added
        self.removed += other.removed
        self.commands += other.commands
        self.preferences += other.preferences
        self.cleared += other.cleared
        self.conflicts += other.conflicts

    @property
    def size(self) -> tuple:
        return (len(self.added), len(self.removed))


def _ground(term, bindings: dict):
    v = _resolve(term, bindings)
    if v is _UNBOUND:
        raise KeyError(f"unbound variable {term!r}")
    return v


def plan(wm, inst: Instantiation) -> Plan:
    """Resolve an instantiation's actions against its bindings.

    ``new`` actions mint fresh symbols here, so planning happens once."""
    b = dict(inst.bindings)
    p = Plan(inst, b)
    for a in inst.production.actions:
        if isinstance(a, New):
            b[a.var.name] = wm.namer.fresh(a.var.name)
        elif isinstance(a, Make):
            p.makes.append((_ground(a.node, b), _ground(a.edge, b), _ground(a.value, b)))
        elif isinstance(a, Remove):
            p.removes.append((_ground(a.node, b), _ground(a.edge, b), _ground(a.value, b)))
        elif isinstance(a, Clear):
            p.clears.append(sym(a.buffer))
        elif isinstance(a, Command):
            if a.name == "em-query":
                cue = tuple((_ground(n, b), _ground(e, b), _ground(v, b)) for n, e, v in a.cue)
            else:
                cue = tuple(
                    CueTest(_ground(e, b), op, None if v is None else _ground(v, b))
                    for e, op, v in a.cue
                )
            p.commands.append(ResolvedCommand(
                a.name,
                sym(a.buffer) if a.buffer else None,
                tuple(_ground(x, b) for x in a.args),
                cue,
                a.depth,
                inst.id,
            ))
        elif isinstance(a, Prefer):
            ref = None if a.ref is None else _ground(a.ref, b)
            p.preferences.append(Preference(
                _ground(a.state, b), _ground(a.operator, b), a.kind, ref, a.value,
                inst.production.name, inst.id,
            ))
    return p


def _check_triple(t) -> bool:
    return isinstance(t[0], SymbolAtom) and isinstance(t[1], SymbolAtom) and is_agent_value(t[2])


def apply_plans(wm, plans: list, now: int, touch: bool = True) -> Delta:
    """Apply plans as one parallel wave.  A triple that one plan creates and
    another removes ends up absent (remove wins); the conflict is logged."""
    delta = Delta()
    removes: dict = {}
    for p in plans:
        for t in p.removes:
            removes.setdefault(t, p.inst.id)
    makes: dict = {}
    for p in plans:
        for t in p.makes:
            if t in removes:
                delta.conflicts.append(t)
                log.info("parallel conflict on %s: remove wins", format_triple(t))
                continue
            makes.setdefault(t, p.inst.id)
    if touch:
        for p in plans:
            for eid in p.inst.tested:
                wm.touch(eid, now)
    for p in plans:
        for buf in p.clears:
            delta.cleared.append((buf, wm.clear_buffer(buf)))
    for t in sorted(removes, key=triple_key):
        e = wm.remove_triple(t)
        if e is not None:
            delta.removed.append(t)
    for t in sorted(makes, key=triple_key):
        if not _check_triple(t):
            raise TypeError(f"ill-formed element {t!r}")
        if t in wm.by_triple:
            continue
        delta.added.append(wm.add(t, Provenance.rule(makes[t]), now))
    for p in plans:
        delta.commands.extend(p.commands)
        delta.preferences.extend(p.preferences)
    return delta


def fire(wm, inst: Instantiation, now: int, inst_id: Optional[int] = None) -> Optional[Delta]:
    """Fire one instantiation (actions in listed order).  A stale
    instantiation is skipped and ``None`` returned."""
    if not still_matches(wm, inst):
        log.info("refraction skip: %s no longer matches", inst.name)
        return None
    if inst_id is not None:
        inst.id = inst_id
    inst.fired_at = now
    p = plan(wm, inst)
    delta = Delta(plan=p)
    for eid in inst.tested:
        wm.touch(eid, now)
    b_actions = _ordered_ops(p, inst)
    for kind, payload in b_actions:
        if kind == "make":
            if payload not in wm.by_triple:
                delta.added.append(wm.add(payload, Provenance.rule(inst.id), now))
        elif kind == "remove":
            if wm.remove_triple(payload) is not None:
                delta.removed.append(payload)
        elif kind == "clear":
            delta.cleared.append((payload, wm.clear_buffer(payload)))
    delta.commands.extend(p.commands)
    delta.preferences.extend(p.preferences)
    return delta


def _ordered_ops(p: Plan, inst: Instantiation) -> list:
    """Interleave a plan's element operations in the rule's action order."""
    makes = iter(p.makes)
    removes = iter(p.removes)
    clears = iter(p.clears)
    out = []
    for a in inst.production.actions:
        if isinstance(a, Make):
            out.append(("make", next(makes)))
        elif isinstance(a, Remove):
            out.append(("remove", next(removes)))
        elif isinstance(a, Clear):
            out.append(("clear", next(clears)))
    return out


# -- justification-supported elaboration -----------------------------------------

@dataclass
class Support:
    inst: Instantiation
    made: list = field(default_factory=list)
    preferences: list = field(default_factory=list)


class SupportTable:
    """Which live instantiation holds up which element / preference."""

    def __init__(self) -> None:
        self.active: dict = {}
        self.holders: dict = {}  # triple -> {key: None}

    def preferences(self) -> list:
        out = []
        for k in sorted(self.active, key=lambda k: self.active[k].inst.sort_key()):
            out.extend(self.active[k].preferences)
        return out

    def is_supported(self, triple) -> bool:
        return bool(self.holders.get(triple))

    def make_persistent(self, triple) -> None:
        self.holders.pop(triple, None)

    def live_instantiations(self) -> list:
        return [s.inst for s in self.active.values()]


def _sync_links(wm, table: SupportTable) -> None:
    links: dict = {}
    for p in table.preferences():
        if p.kind == ACCEPTABLE:
            links.setdefault(p.state, {})[p.operator] = None
    if links != getattr(wm, "pref_links", {}):
        wm.pref_links = links
        wm.version += 1


@dataclass
class ElaborationResult:
    waves: int = 0
    fired: list = field(default_factory=list)
    retracted: list = field(default_factory=list)
    added: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    commands: list = field(default_factory=list)


def elaborate(wm, productions: Iterable[Production], table: SupportTable, now: int,
              next_id=None, limit: int = RUNAWAY_LIMIT, on_fire=None) -> ElaborationResult:
    """Run i-support waves to quiescence.

    Each wave fires every new match and retracts every instantiation that
    stopped matching, both judged against the same snapshot.
    """
    rules = [p for p in productions if p.role in I_SUPPORT_ROLES]
    res = ElaborationResult()
    counter = next_id or _counter()
    for _ in range(limit):
        current = {i.key: i for i in match(wm, rules)}
        new = [i for k, i in current.items() if k not in table.active]
        gone = [k for k in table.active if k not in current]
        if not new and not gone:
            return res
        res.waves += 1
        plans = []
        for inst in new:
            inst.id = counter()
            inst.fired_at = now
            plans.append(plan(wm, inst))
        if on_fire is not None:
            for p in plans:
                on_fire(p)
        for p in plans:
            for eid in p.inst.tested:
                wm.touch(eid, now)
            sup = Support(p.inst, list(p.makes), list(p.preferences))
            table.active[p.inst.key] = sup
            for t in p.makes:
                if not _check_triple(t):
                    raise TypeError(f"ill-formed element {t!r}")
                if t in wm.by_triple and not table.is_supported(t):
                    continue  # already persistent
                table.holders.setdefault(t, {})[p.inst.key] = None
                if t not in wm.by_triple:
                    res.added.append(wm.add(t, Provenance.rule(p.inst.id), now))
            res.commands.extend(p.commands)
            res.fired.append(p.inst)
        for k in gone:
            sup = table.active.pop(k)
            res.retracted.append(sup.inst)
            for t in sup.made:
                h = table.holders.get(t)
                if h is None or k not in h:
                    continue
                del h[k]
                if not h:
                    del table.holders[t]
                    if wm.remove_triple(t) is not None:
                        res.removed.append(t)
        _sync_links(wm, table)
    raise RunawayElaborationError(f"elaboration did not settle within {limit} waves")


def _counter():
    n = [0]

    def nxt():
        n[0] += 1
        return n[0]

    return nxt


# -- operator decision -------------------------------------------------------------

@dataclass
class Decision:
    kind: str  # "select" or "impasse"
    operator: Optional[SymbolAtom] = None
    impasse: Optional[str] = None
    candidates: tuple = ()
    q_values: dict = field(default_factory=dict)
    rl_rules: tuple = ()  # (rule, value) pairs supporting the selection


def _sccs(nodes: list, edges: dict) -> list:
    """Tarjan's algorithm over a small graph; returns lists of nodes."""
    index: dict = {}
    low: dict = {}
    stack: list = []
    on: set = set()
    out = []
    counter = [0]

    def strong(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for w in edges.get(v, ()):
            if w not in index:
                strong(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w is v:
                    break
            out.append(comp)

    for v in nodes:
        if v not in index:
            strong(v)
    return out


def _order(atoms) -> tuple:
    return tuple(sorted(atoms, key=lambda a: a.text))


def decide(preferences: Iterable[Preference], rng: Optional[random.Random] = None,
           temperature: float = 1.0, values: Optional[dict] = None) -> Decision:
    """Resolve one state's preferences into a selection or an impasse.

    ``values`` optionally overrides numeric-indifferent values per rule
    (the RL utilities).
    """
    prefs = list(preferences)
    by_kind: dict = {k: [] for k in PREFERENCE_KINDS}
    for p in prefs:
        by_kind[p.kind].append(p)
    rejected = {p.operator for p in by_kind[REJECT]}
    cands = {p.operator for p in by_kind[ACCEPTABLE]} - rejected
    if not cands:
        return Decision("impasse", impasse="state-no-change")
    best = {p.operator for p in by_kind[BEST]} & cands
    if best:
        cands = best
    edges: dict = {}
    for p in by_kind[BETTER]:
        if p.operator in cands and p.ref in cands and p.operator is not p.ref:
            edges.setdefault(p.operator, {})[p.ref] = None
    for p in by_kind[WORSE]:
        if p.operator in cands and p.ref in cands and p.operator is not p.ref:
            edges.setdefault(p.ref, {})[p.operator] = None
    ordered = list(_order(cands))
    cyclic = [c for comp in _sccs(ordered, edges) if len(comp) > 1 for c in comp]
    if cyclic:
        return Decision("impasse", impasse="conflict", candidates=_order(cyclic))
    dominated = {b for a in edges for b in edges[a]}
    cands = cands - dominated
    worst = {p.operator for p in by_kind[WORST]} & cands
    if cands - worst:
        cands = cands - worst
    ordered = list(_order(cands))
    if len(ordered) == 1:
        op = ordered[0]
        return Decision("select", op, candidates=(op,), rl_rules=_rl_support(prefs, op, values))
    unary = {p.operator for p in by_kind[INDIFFERENT] if p.ref is None}
    binary = {(p.operator, p.ref) for p in by_kind[INDIFFERENT] if p.ref is not None}
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if not ((a in unary and b in unary) or (a, b) in binary or (b, a) in binary):
                return Decision("impasse", impasse="tie", candidates=tuple(ordered))
    q = {}
    for op in ordered:
        q[op] = sum(v for _, v in _rl_support(prefs, op, values))
    rng = rng or random.Random(0)
    weights = kernels.softmax_weights([q[o] for o in ordered], temperature)
    r = rng.random()
    acc = 0.0
    chosen = ordered[-1]
    for o, w in zip(ordered, weights):
        acc += w
        if r < acc:
            chosen = o
            break
    return Decision("select", chosen, candidates=tuple(ordered), q_values=q,
                    rl_rules=_rl_support(prefs, chosen, values))


def _rl_support(prefs: list, op, values: Optional[dict]) -> tuple:
    out = []
    for p in prefs:
        if p.kind != INDIFFERENT or p.ref is not None or p.operator is not op:
            continue
        if values is not None and p.rule in values:
            out.append((p.rule, values[p.rule]))
        elif p.value is not None:
            out.append((p.rule, p.value))
    return tuple(sorted(out, key=lambda x: (x[0] or "")))


# -- operator application -----------------------------------------------------------

@dataclass
class ApplyResult:
    no_change: bool
    delta: Delta = field(default_factory=Delta)
    fired: list = field(default_factory=list)
    waves: int = 0


def operator_name(wm, op: SymbolAtom) -> Optional[str]:
    vals = wm.values(op, NAME)
    for v in vals:
        if isinstance(v, SymbolAtom):
            return v.text
    return None


def apply_operator(wm, op: SymbolAtom, productions: Iterable[Production], now: int,
                   next_id=None, table: Optional[SupportTable] = None,
                   limit: int = RUNAWAY_LIMIT, on_fire=None, fired_keys=None) -> ApplyResult:
    """Fire the selected operator's application rules in parallel waves,
    re-running elaborations between waves.  No match on the first wave is an
    operator no-change."""
    prods = list(productions)
    opname = operator_name(wm, op)
    app = [p for p in prods if p.role == APPLICATION and p.operator == opname]
    counter = next_id or _counter()
    done = fired_keys if fired_keys is not None else set()
    res = ApplyResult(no_change=False)
    for wave in range(limit):
        insts = [i for i in match(wm, app)
                 if i.key not in done and op in i.bindings.values()]
        if not insts:
            if wave == 0:
                res.no_change = True
            return res
        res.waves += 1
        plans = []
        for inst in insts:
            done.add(inst.key)
            inst.id = counter()
            inst.fired_at = now
            plans.append(plan(wm, inst))
            res.fired.append(inst)
        if on_fire is not None:
            for p in plans:
                on_fire(p)
        d = apply_plans(wm, plans, now)
        if table is not None:
            for p in plans:
                for t in p.makes:
                    table.make_persistent(t)
        res.delta.extend(d)
        if table is not None:
            er = elaborate(wm, prods, table, now, counter, limit, on_fire)
            res.delta.added += er.added
            res.delta.removed += er.removed
            res.delta.commands += er.commands
    raise RunawayElaborationError(f"operator application did not settle within {limit} waves")


def select_operator_element(wm, state: SymbolAtom, op: SymbolAtom, now: int) -> int:
    return wm.add((state, OPERATOR, op), ARCH_PROV, now)


def mode_of(wm) -> str:
    return wm.mode


__all__ = [
    "Var", "Test", "Condition", "Make", "Remove", "New", "Clear", "Command", "Prefer",
    "Production", "ProceduralMemory", "Instantiation", "Preference", "Decision",
    "match", "select_actr", "fire", "plan", "apply_plans", "elaborate", "decide",
    "apply_operator", "SupportTable", "COMMAND_WORDS", "SOAR",
]
