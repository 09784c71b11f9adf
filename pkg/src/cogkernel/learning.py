"""Procedural learning.

Metadata learning adjusts utilities (ACT-R temporal-difference updates,
Soar RL over numeric-indifferent preferences) and forgets unused learned
rules.  Structure learning builds new rules: production compilation fuses
two consecutive ACT-R firings; chunking summarises the work a Soar substate
did to produce a result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from . import kernels
from .core import SymbolAtom, is_innate, sym, triple_key, value_key
from .procedural import (
    APPLICATION,
    CHUNKED,
    COMPILED,
    ELABORATION,
    EVALUATION,
    HAND_WRITTEN,
    NAME,
    PLAIN,
    Clear,
    Command,
    Condition,
    Make,
    New,
    Prefer,
    Production,
    ProceduralMemory,
    Remove,
    Test,
    Var,
)
from .wm import ARCH, OPERATOR, PERCEPT, RETRIEVAL, RULE, STATUS, STATUS_EDGE

log = logging.getLogger(__name__)

RULE_CREATED = "rule-created"
EXTERNAL = "external"

RETRIEVED = sym("retrieved")
SUCCESS = sym("success")


@dataclass(frozen=True)
class RewardEvent:
    amount: float
    at: int
    source: str = EXTERNAL


@dataclass
class UtilityParams:
    alpha: float = 0.2
    noise: float = 0.25
    gamma: float = 0.9
    init_utility: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")


@dataclass(frozen=True)
class Firing:
    name: str
    at: int


# -- utility learning -----------------------------------------------------------

def td_step(value: float, target: float, alpha: float) -> float:
    return value + alpha * (target - value)


def update_utilities_actr(pm: ProceduralMemory, history: list, reward: RewardEvent,
                          alpha: float) -> dict:
    """Credit every firing since the last reward, discounted by delay in
    seconds.  Clears ``history``; returns per-rule utility deltas."""
    deltas: dict = {}
    for f in history:
        if f.name not in pm:
            continue
        r = reward.amount - (reward.at - f.at) / 1000.0
        old = pm.utility(f.name)
        new = td_step(old, r, alpha)
        pm.set_utility(f.name, new, reward.at)
        pm.meta[f.name].last_reward_at = reward.at
        deltas[f.name] = deltas.get(f.name, 0.0) + (new - old)
    history.clear()
    return deltas


def rl_target(r: float, q_curr: float, gamma: float) -> float:
    return r + gamma * q_curr


def update_rl_soar(pm: ProceduralMemory, prev_support: Iterable, r: float, q_curr: float,
                   alpha: float, gamma: float, now: int = 0) -> dict:
    """One TD step for the previous decision.

    ``prev_support`` lists ``(rule, value)`` pairs whose numeric-indifferent
    preferences summed to ``Q_prev``.  The delta is shared equally among
    them.  Pass ``q_curr=0`` at the end of an episode.
    """
    support = [(name, v) for name, v in prev_support if name is not None and name in pm]
    if not support:
        return {}
    q_prev = sum(v for _, v in support)
    delta = alpha * (rl_target(r, q_curr, gamma) - q_prev)
    share = delta / len(support)
    out = {}
    for name, _ in support:
        pm.set_utility(name, pm.utility(name) + share, now)
        out[name] = out.get(name, 0.0) + share
    return out


def absorb_duplicate(existing: float, parent1: float, alpha: float) -> float:
    """Boost a re-learned rule toward its first parent's utility."""
    return existing + alpha * (parent1 - existing)


def forget_rules(pm: ProceduralMemory, threshold: float, now: int, d: float = 0.5,
                 enabled: bool = True, floor_ms: float = 1.0) -> list:
    """Excise learned rules whose firing-history activation fell below
    ``threshold``.  Creation counts as the first use."""
    if not enabled:
        return []
    out = []
    for name in sorted(pm.rules):
        if pm.rules[name].provenance == HAND_WRITTEN:
            continue
        m = pm.meta[name]
        if kernels.bla([m.created_at] + list(m.firings), now, d, floor_ms) < threshold:
            out.append(name)
    for name in out:
        pm.remove(name)
    return out


# -- canonical forms ---------------------------------------------------------------

def _term_key(t) -> tuple:
    if isinstance(t, Var):
        return (0, "")
    return (1,) + value_key(t)


def _cond_key(c: Condition) -> tuple:
    return (c.negative, _term_key(c.node), _term_key(c.edge), _term_key(c.value),
            tuple((t.op, _term_key(t.operand)) for t in c.tests))


def canonical_form(prod: Production) -> tuple:
    """Structure of a rule with conditions sorted and variables renamed in
    order of first appearance."""
    conds = sorted(prod.conditions, key=_cond_key)
    names: dict = {}

    def r(t):
        if isinstance(t, Var):
            if t.name not in names:
                names[t.name] = f"v{len(names)}"
            return ("var", names[t.name])
        return ("const",) + value_key(t)

    cform = tuple(
        (c.negative, r(c.node), r(c.edge), r(c.value), tuple((t.op, r(t.operand)) for t in c.tests))
        for c in conds
    )
    aform = []
    for a in prod.actions:
        if isinstance(a, (Make, Remove)):
            aform.append((type(a).__name__, r(a.node), r(a.edge), r(a.value)))
        elif isinstance(a, New):
            aform.append(("New", r(a.var)))
        elif isinstance(a, Clear):
            aform.append(("Clear", a.buffer))
        elif isinstance(a, Command):
            cue = tuple(tuple(r(x) if not isinstance(x, str) or x not in _OPS else x for x in item)
                        for item in a.cue)
            aform.append(("Command", a.name, a.buffer, tuple(r(x) for x in a.args), cue, a.depth))
        elif isinstance(a, Prefer):
            aform.append(("Prefer", r(a.state), r(a.operator), a.kind,
                          None if a.ref is None else r(a.ref), a.value))
    return (prod.role, prod.operator, cform, tuple(aform))


_OPS = frozenset(("=", "!=", "<", ">", "<=", ">=", "present"))


def find_duplicate(pm: ProceduralMemory, prod: Production, provenance: Optional[str] = None) -> Optional[str]:
    form = canonical_form(prod)
    for name in sorted(pm.rules):
        other = pm.rules[name]
        if provenance is not None and other.provenance != provenance:
            continue
        if canonical_form(other) == form:
            return name
    return None


def unique_name(pm: ProceduralMemory, base: str) -> str:
    if base not in pm:
        return base
    i = 2
    while f"{base}-{i}" in pm:
        i += 1
    return f"{base}-{i}"


# -- production compilation -----------------------------------------------------------

@dataclass
class FiringRecord:
    """What compilation needs to know about one ACT-R firing."""

    production: Production
    bindings: dict  # variable -> value, including symbols minted by ``new``
    tested_triples: tuple
    at: int = 0


@dataclass
class NotCompilable:
    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass
class Composition:
    production: Production
    bindings: dict  # the ground instance of the composed rule
    elided: frozenset  # triples made by the first rule and consumed by the second

    def __bool__(self) -> bool:
        return True


def _ground(term, b: dict):
    if isinstance(term, Var):
        return b.get(term.name)
    return term


def _ground_triple(a, b: dict) -> tuple:
    return (_ground(a.node, b), _ground(a.edge, b), _ground(a.value, b))


def _pattern_hits(c: Condition, b: dict, triple: tuple) -> bool:
    """Could negative condition ``c`` (partially bound by ``b``) match ``triple``?"""
    local = dict(b)
    for term, v in zip((c.node, c.edge, c.value), triple):
        if isinstance(term, Var):
            cur = local.get(term.name)
            if cur is None:
                local[term.name] = v
            elif cur is not v and cur != v:
                return False
        elif term is not v and term != v:
            return False
    from .procedural import _compare  # local import keeps the public surface small

    for t in c.tests:
        opnd = _ground(t.operand, local)
        if opnd is None:
            continue
        if not _compare(t.op, triple[2], opnd):
            return False
    return True


def compile_pair(first: FiringRecord, second: FiringRecord, init_utility: float = 0.0,
                 percept_buffers: Iterable = ("visual", "input"),
                 name: Optional[str] = None):
    """Fuse two consecutive firings into one rule.

    Conditions of the second rule that the first rule's actions satisfied
    are dropped along with those actions; a retrieval requested by the first
    rule and read by the second is replaced by the retrieved constants.
    Returns a :class:`Composition` or :class:`NotCompilable`.
    """
    p1, p2 = first.production, second.production
    b1, b2 = first.bindings, second.bindings
    for p in (p1, p2):
        for a in p.actions:
            if isinstance(a, Command) and a.name in ("motor", "halt"):
                return NotCompilable(f"{p.name} interacts with the environment")
    percepts = {sym(x) if isinstance(x, str) else x for x in percept_buffers}
    pos1 = [c for c in p1.conditions if not c.negative]
    pos2 = [c for c in p2.conditions if not c.negative]
    ground2 = list(second.tested_triples)
    for t in ground2:
        if t[0] in percepts:
            return NotCompilable(f"{p2.name} tests perception")

    requests = {}
    for a in p1.actions:
        if isinstance(a, Command) and a.name in ("retrieve", "retrieve-blend"):
            requests[sym(a.buffer)] = a
    consumed: dict = {}
    for t in ground2:
        if t[0] in requests and t[1] is RETRIEVED:
            consumed[t[0]] = t[2]
    for t in ground2:
        if t[0] in requests and t[1] is STATUS_EDGE and t[2] is not SUCCESS:
            return NotCompilable(f"{p2.name} tests a retrieval outcome other than success")
        if t[0] in requests and t[1] is STATUS_EDGE and t[0] not in consumed:
            return NotCompilable(f"{p2.name} waits on a retrieval it does not read")
    for a in p2.actions:
        if isinstance(a, Command) and a.name in ("retrieve", "retrieve-blend"):
            if sym(a.buffer) in requests and sym(a.buffer) not in consumed:
                return NotCompilable("both rules request the same buffer")
    chunk_nodes = set(consumed.values())
    constants = set(chunk_nodes)
    for t in ground2:
        if t[0] in chunk_nodes:
            constants.add(t[2])

    made1, removed1 = [], []
    for a in p1.actions:
        if isinstance(a, Make):
            made1.append(_ground_triple(a, b1))
        elif isinstance(a, Remove):
            removed1.append(_ground_triple(a, b1))
    made1_set = set(made1)
    elided = frozenset(t for t in ground2 if t in made1_set)

    keep2 = []
    for c, t in zip(pos2, ground2):
        if t in made1_set:
            continue
        if t[0] in consumed and t[1] in (RETRIEVED, STATUS_EDGE):
            continue
        if t[0] in chunk_nodes:
            continue
        keep2.append(c)
    neg2 = []
    for c in p2.conditions:
        if not c.negative:
            continue
        if any(_pattern_hits(c, b2, t) for t in made1):
            return NotCompilable(f"{p1.name} creates what {p2.name} requires absent")
        if any(_pattern_hits(c, b2, t) for t in removed1):
            continue
        neg2.append(c)

    # one variable per distinct bound value, named after its first variable
    var_of: dict = {}
    used: set = set()
    frozen = [False]

    def var_for(value, hint: str) -> Var:
        for k, v in var_of.items():
            if _same_value(k, value):
                return v
        name_ = hint
        i = 2
        while name_ in used:
            name_ = f"{hint}{i}"
            i += 1
        used.add(name_)
        var_of[value] = Var(name_)
        return var_of[value]

    def subst(term, b: dict, wild: dict):
        if not isinstance(term, Var):
            return term
        if term.name not in b:
            if term.name not in wild:
                n = f"w-{term.name}"
                i = 2
                while n in used:
                    n = f"w-{term.name}{i}"
                    i += 1
                used.add(n)
                wild[term.name] = Var(n)
            return wild[term.name]
        v = b[term.name]
        if _is_constant(v, constants):
            return v
        if frozen[0] and not any(_same_value(k, v) for k in var_of):
            # bound only inside an elided condition: the first rule's action
            # wrote this value as a constant
            return v
        return var_for(v, term.name)

    # register names in a fixed order so naming is deterministic
    for conds_, b in ((pos1, b1), (keep2, b2)):
        for c in conds_:
            if not c.negative:
                for v in c.variables():
                    if v in b and not _is_constant(b[v], constants):
                        var_for(b[v], v)
    for p, b in ((p1, b1), (p2, b2)):
        for a in p.actions:
            if isinstance(a, New) and a.var.name in b:
                var_for(b[a.var.name], a.var.name)

    frozen[0] = True

    def subst_cond(c: Condition, b: dict) -> Condition:
        wild: dict = {}
        return Condition(
            subst(c.node, b, wild), subst(c.edge, b, wild), subst(c.value, b, wild),
            c.negative, tuple(Test(t.op, subst(t.operand, b, wild)) for t in c.tests),
        )

    conds: list = []
    for c in p1.conditions:
        conds.append(subst_cond(c, b1))
    for c in keep2 + neg2:
        conds.append(subst_cond(c, b2))
    conds = list(dict.fromkeys(conds))

    def subst_action(a, b: dict):
        w: dict = {}
        if isinstance(a, Make):
            return Make(subst(a.node, b, w), subst(a.edge, b, w), subst(a.value, b, w))
        if isinstance(a, Remove):
            return Remove(subst(a.node, b, w), subst(a.edge, b, w), subst(a.value, b, w))
        if isinstance(a, New):
            return New(subst(a.var, b, w))
        if isinstance(a, Clear):
            return a
        if isinstance(a, Command):
            if a.name == "em-query":
                cue = tuple(tuple(subst(x, b, w) for x in item) for item in a.cue)
            else:
                cue = tuple((subst(e, b, w), op, None if v is None else subst(v, b, w))
                            for e, op, v in a.cue)
            return Command(a.name, a.buffer, tuple(subst(x, b, w) for x in a.args), cue, a.depth)
        if isinstance(a, Prefer):
            return Prefer(subst(a.state, b, w), subst(a.operator, b, w), a.kind,
                          None if a.ref is None else subst(a.ref, b, w), a.value)
        raise TypeError(a)

    # end state must equal running the pair in sequence: a triple made then
    # removed is just removed, one removed then re-made is just made
    made2 = {_ground_triple(a, b2) for a in p2.actions if isinstance(a, Make)}
    removed2 = {_ground_triple(a, b2) for a in p2.actions if isinstance(a, Remove)}
    actions = []
    for a in p1.actions:
        if isinstance(a, Make) and _ground_triple(a, b1) in removed2:
            continue
        if isinstance(a, Remove) and _ground_triple(a, b1) in made2:
            continue
        if isinstance(a, Command) and a.name in ("retrieve", "retrieve-blend") and sym(a.buffer) in consumed:
            continue
        actions.append(subst_action(a, b1))
    for a in p2.actions:
        actions.append(subst_action(a, b2))
    actions = list(dict.fromkeys(actions))

    bindings = {}
    for value, v in var_of.items():
        bindings[v.name] = value
    # a variable bound by `new` is not a condition binding
    new_vars = {a.var.name for a in actions if isinstance(a, New)}
    bindings = {k: v for k, v in bindings.items() if k not in new_vars}
    prod = Production(
        name or f"{p1.name}__{p2.name}",
        PLAIN,
        tuple(conds),
        tuple(actions),
        utility=init_utility,
        provenance=COMPILED,
        origin=f"{p1.name} + {p2.name}",
    )
    return Composition(prod, bindings, elided)


def _same_value(a, b) -> bool:
    if isinstance(a, SymbolAtom) or isinstance(b, SymbolAtom):
        return a is b
    return type(a) is type(b) and a == b


def _is_constant(v, constants: set) -> bool:
    if is_innate(v):
        return True
    return any(_same_value(v, c) for c in constants)


def learn_compiled(pm: ProceduralMemory, comp: Composition, parent1: str, alpha: float,
                   now: int) -> tuple:
    """Add a composed rule, or boost its existing twin.  Returns
    ``(name, is_new, utility_delta)``."""
    dup = find_duplicate(pm, comp.production, COMPILED)
    if dup is not None:
        old = pm.utility(dup)
        new = absorb_duplicate(old, pm.utility(parent1), alpha)
        pm.set_utility(dup, new, now)
        return dup, False, new - old
    prod = comp.production
    prod.name = unique_name(pm, prod.name)
    pm.add(prod, now)
    return prod.name, True, 0.0


# -- chunking ----------------------------------------------------------------------

@dataclass
class ElementRecord:
    id: int
    triple: tuple
    kind: str
    derivation: object
    created_at: int
    depth: Optional[int] = None  # substate depth of the node when created


@dataclass
class FiredRecord:
    id: int
    production: Production
    bindings: dict
    tested: tuple
    tested_depths: tuple  # substate depth of each tested element when matched
    depth: int  # deepest of those: the state the rule matched in
    at: int


@dataclass
class ChunkOutcome:
    production: Optional[Production]
    reason: str = ""
    conditions: tuple = ()
    results: tuple = ()

    def __bool__(self) -> bool:
        return self.production is not None


def backtrace(result_sources: Iterable, sub_depth: int, sub_created: int, elements: dict,
              fired: dict) -> tuple:
    """Walk derivations from the result-producing instantiations back to
    the superstate.  Returns ``(condition_ids, refused_reason)``."""
    conds: dict = {}
    seen: set = set()
    stack = list(result_sources)
    visited_prov: set = set()
    while stack:
        kind, source = stack.pop()
        if (kind, source) in visited_prov:
            continue
        visited_prov.add((kind, source))
        if kind == RULE:
            rec = fired.get(source)
            if rec is None:
                return (), f"no record of instantiation {source}"
            pairs = list(zip(rec.tested, rec.tested_depths))
        else:
            pairs = []
            for eid in source:
                rec_e = elements.get(eid)
                pairs.append((eid, None if rec_e is None else _depth_hint(rec_e)))
        for eid, depth in pairs:
            if eid in seen:
                continue
            seen.add(eid)
            er = elements.get(eid)
            if er is None:
                return (), f"element #{eid} has no history"
            if er.kind in (STATUS, PERCEPT) and er.created_at >= sub_created:
                return (), f"result depends on {er.kind} element created in the substate"
            local = depth is not None and depth >= sub_depth
            if not local:
                conds[eid] = None
                continue
            if er.kind == ARCH:
                continue
            d = er.derivation
            if d is not None and d.kind in (RULE, RETRIEVAL):
                stack.append((d.kind, d.source))
    return tuple(conds), ""


def _depth_hint(er: ElementRecord):
    return er.depth


def chunk_substate(results: list, result_prefs: list, sources: list, sub_depth: int,
                   sub_created: int, elements: dict, fired: dict,
                   is_identifier: Callable, impasse: str, superstate: SymbolAtom,
                   operator: Optional[SymbolAtom] = None, operator_name: Optional[str] = None,
                   name: str = "chunk") -> ChunkOutcome:
    """Build a rule that produces ``results`` straight from the superstate.

    ``sources`` holds ``(kind, source)`` derivations of the results.
    Identifiers become variables; other symbols stay constants.
    """
    cond_ids, reason = backtrace(sources, sub_depth, sub_created, elements, fired)
    if reason:
        log.info("chunk refused: %s", reason)
        return ChunkOutcome(None, reason)
    triples = sorted({elements[e].triple for e in cond_ids}, key=triple_key)
    if impasse == "operator-no-change" and operator is not None and operator_name:
        extra = [(superstate, OPERATOR, operator), (operator, NAME, sym(operator_name))]
        for t in extra:
            if t not in triples:
                triples.append(t)
        triples.sort(key=triple_key)
    names: dict = {}
    taken: set = set()

    def v(x):
        if isinstance(x, SymbolAtom) and is_identifier(x):
            if x not in names:
                base = "".join(ch for ch in x.text.lower() if ch.isalnum() or ch == "-") or "x"
                n = base
                i = 2
                while n in taken:
                    n = f"{base}-{i}"
                    i += 1
                taken.add(n)
                names[x] = Var(n)
            return names[x]
        return x

    conds = tuple(Condition(v(n), v(e), v(val)) for n, e, val in triples)
    actions: list = []
    minted: set = set()
    res_sorted = sorted(set(results), key=triple_key)
    for n, e, val in res_sorted:
        for x in (n, val):
            if isinstance(x, SymbolAtom) and is_identifier(x) and x not in names:
                var = v(x)
                if var.name not in minted:
                    minted.add(var.name)
                    actions.append(New(var))
        actions.append(Make(v(n), v(e), v(val)))
    for p in result_prefs:
        for x in (p.state, p.operator, p.ref):
            if x is not None and is_identifier(x) and x not in names:
                var = v(x)
                minted.add(var.name)
                actions.append(New(var))
        actions.append(Prefer(v(p.state), v(p.operator), p.kind,
                              None if p.ref is None else v(p.ref), p.value))
    if not actions:
        return ChunkOutcome(None, "nothing to learn")
    if impasse == "operator-no-change" and operator_name:
        role, opname = APPLICATION, operator_name
    elif results:
        role, opname = ELABORATION, None
    else:
        role, opname = EVALUATION, None
    prod = Production(name, role, conds, tuple(actions), provenance=CHUNKED, operator=opname,
                      origin=f"{impasse} impasse")
    return ChunkOutcome(prod, "", tuple(triples), tuple(res_sorted))


def learn_chunk(pm: ProceduralMemory, prod: Production, now: int, repetitions: int = 1) -> tuple:
    """Install a chunk, or count a repeat of an existing one.  With a
    repetition gate ``k > 1`` a chunk is enabled on its ``k``-th learning.
    Returns ``(name, is_new)``."""
    dup = find_duplicate(pm, prod, CHUNKED)
    if dup is not None:
        m = pm.meta[dup]
        m.learn_count += 1
        m.stamp = now
        if m.learn_count >= repetitions:
            m.enabled = True
        return dup, False
    prod.name = unique_name(pm, prod.name)
    pm.add(prod, now, enabled=repetitions <= 1)
    return prod.name, True


__all__ = [
    "RewardEvent", "UtilityParams", "Firing", "update_utilities_actr", "update_rl_soar",
    "absorb_duplicate", "forget_rules", "canonical_form", "compile_pair", "FiringRecord",
    "NotCompilable", "Composition", "learn_compiled", "chunk_substate", "learn_chunk",
    "ElementRecord", "FiredRecord", "backtrace", "td_step",
]
