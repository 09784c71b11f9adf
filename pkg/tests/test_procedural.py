import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from cogkernel.core import sym
from cogkernel.errors import RunawayElaborationError
from cogkernel.procedural import (
    APPLICATION,
    Condition,
    Make,
    Preference,
    Production,
    Remove,
    SupportTable,
    Test as ValueTest,
    Var,
    apply_operator,
    decide,
    elaborate,
    fire,
    match,
    select_actr,
    still_matches,
)
from cogkernel.wm import ARCH_PROV, TOP_STATE, WorkingMemory

from helpers import load
from oracles import binary_prefs, decide_oracle, decision_tuple, unary_prefs

S1 = TOP_STATE


def soar_wm(*triples):
    wm = WorkingMemory("soar", buffers=())
    for t in triples:
        wm.add(tuple(sym(x) if isinstance(x, str) else x for x in t), ARCH_PROV, 0)
    return wm


def rules(text, mode="soar"):
    return load(f"mode {mode}\n" + text).productions


# -- match -----------------------------------------------------------------------

def test_single_condition_single_instantiation():
    wm = WorkingMemory("actr")
    wm.add((sym("goal"), sym("step"), sym("one")), ARCH_PROV, 0)
    (p,) = rules("rule r { (goal ^step one) --> }", "actr")
    assert len(match(wm, [p])) == 1


def test_two_bindings():
    wm = soar_wm(("S1", "g", "G"), ("G", "item", "a"), ("G", "item", "b"))
    (p,) = rules("elaborate r { (?g ^item ?x) --> }")
    got = sorted(i.bindings["x"].text for i in match(wm, [p]))
    assert got == ["a", "b"]


def test_negative_condition_blocks():
    wm = soar_wm(("S1", "done", "true"))
    (p,) = rules("elaborate r { (?s ^superstate nil) -(?s ^done true) --> }")
    assert match(wm, [p]) == []


# brute-force matcher: try every tuple of elements for the positive
# conditions, then check tests and negatives by scanning
def _same(a, b):
    return type(a) is type(b) and a == b


def _unify(cond, triple, b):
    b = dict(b)
    for term, v in zip((cond.node, cond.edge, cond.value), triple):
        if isinstance(term, Var):
            if term.name in b:
                if not _same(b[term.name], v):
                    return None
            else:
                b[term.name] = v
        elif not _same(term, v):
            return None
    return b


def _test(op, a, b):
    if op == "!=":
        return not _same(a, b)
    if not (isinstance(a, float) and isinstance(b, float)):
        return False
    return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]


def _tests_hold(cond, b):
    subj = b[cond.value.name] if isinstance(cond.value, Var) else cond.value
    for t in cond.tests:
        opnd = b[t.operand.name] if isinstance(t.operand, Var) else t.operand
        if not _test(t.op, subj, opnd):
            return False
    return True


def oracle_match(triples, prod):
    pos = [c for c in prod.conditions if not c.negative]
    neg = [c for c in prod.conditions if c.negative]
    out = []
    for combo in itertools.product(triples, repeat=len(pos)):
        b = {}
        for c, t in zip(pos, combo):
            b = _unify(c, t, b)
            if b is None:
                break
        if b is None or not all(_tests_hold(c, b) for c in pos):
            continue
        blocked = False
        for c in neg:
            for t in triples:
                nb = _unify(c, t, b)
                if nb is not None and _tests_hold(c, nb):
                    blocked = True
                    break
            if blocked:
                break
        if not blocked:
            out.append(combo)
    return sorted(out, key=repr)


NODES = [sym(x) for x in ("na", "nb", "nc")]
EDGES = [sym(x) for x in ("p", "q")]
VALUES = NODES + [1.0, 2.0, 3.0]


def _random_term(rng, pool, vars_):
    if rng.random() < 0.5:
        return Var(rng.choice(vars_))
    return rng.choice(pool)


def _random_production(rng, n_pos, n_neg):
    vars_ = ["x", "y", "z"]
    conds = []
    for _ in range(n_pos):
        c = Condition(_random_term(rng, NODES, vars_), _random_term(rng, EDGES, ["e"]),
                      _random_term(rng, VALUES, vars_))
        conds.append(c)
    bound = {v for c in conds for v in c.variables()}
    # value tests against constants or variables bound positively
    for i, c in enumerate(conds):
        if rng.random() < 0.3:
            op = rng.choice(["!=", "<", ">", "<=", ">="])
            opnd = rng.choice([2.0] + [Var(v) for v in sorted(bound)])
            conds[i] = Condition(c.node, c.edge, c.value, False, (ValueTest(op, opnd),))
    for _ in range(n_neg):
        conds.append(Condition(_random_term(rng, NODES, vars_ + ["w"]), rng.choice(EDGES),
                               _random_term(rng, VALUES, vars_ + ["w"]), True))
    return Production("p", "elaboration", tuple(conds))


def test_match_equals_exhaustive_enumeration():
    rng = random.Random(77)
    for trial in range(1000):
        n_pos = rng.randint(1, 5)
        n_neg = rng.randint(0, 5 - n_pos)
        size = 30 if n_pos <= 3 else 8
        wm = WorkingMemory("soar", buffers=())
        while len(wm) < size:
            wm.add((rng.choice(NODES), rng.choice(EDGES), rng.choice(VALUES)), ARCH_PROV, 0)
        prod = _random_production(rng, n_pos, n_neg)
        triples = [e.triple for e in wm.elements.values()]
        got = sorted((i.tested_triples for i in match(wm, [prod])), key=repr)
        assert got == oracle_match(triples, prod), (trial, prod)


def test_instantiations_replay():
    wm = soar_wm(("S1", "g", "G"), ("G", "item", "a"), ("G", "item", "b"))
    (p,) = rules("elaborate r { (?s ^g ?g) (?g ^item ?x) --> }")
    for inst in match(wm, [p]):
        again = [
            tuple(inst.bindings.get(t.name) if isinstance(t, Var) else t
                  for t in (c.node, c.edge, c.value))
            for c in p.conditions
        ]
        assert tuple(again) == inst.tested_triples


# -- select_actr ---------------------------------------------------------------------

def _cands(names):
    wm = WorkingMemory("actr")
    wm.add((sym("goal"), sym("s"), 1.0), ARCH_PROV, 0)
    prods = [Production(n, conditions=(Condition(sym("goal"), sym("s"), 1.0),)) for n in names]
    return match(wm, prods)


def test_noise_free_argmax():
    c = _cands(["A", "B"])
    assert select_actr(c, random.Random(0), 0.0, {"A": 2.0, "B": 1.0}).name == "A"
    assert select_actr(c, random.Random(0), 0.0, {"A": 1.0, "B": 2.0}).name == "B"


def test_equal_utilities_pick_lexicographic_first():
    c = _cands(["zeta", "alpha", "mid"])
    u = {"zeta": 1.0, "alpha": 1.0, "mid": 1.0}
    assert select_actr(c, random.Random(0), 0.0, u).name == "alpha"


def test_empty_candidates_no_match():
    assert select_actr([], random.Random(0), 0.25, {}) is None


def _win_probability(du, s):
    # P(du + e1 - e2 > 0) with e1, e2 iid logistic(0, s)
    f = lambda x: math.exp(-x / s) / (s * (1 + math.exp(-x / s)) ** 2)  # noqa: E731
    F = lambda x: 1.0 / (1.0 + math.exp(-x / s))  # noqa: E731
    val, _ = integrate.quad(lambda e2: f(e2) * (1.0 - F(e2 - du)), -60 * s, 60 * s, limit=200)
    return val


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_noisy_selection_frequency(s):
    c = _cands(["A", "B"])
    u = {"A": 2.0, "B": 1.0}
    rng = random.Random(42)
    wins = sum(select_actr(c, rng, s, u).name == "A" for _ in range(10000))
    assert abs(wins / 10000 - _win_probability(1.0, s)) < 0.02


# utilities on a 1/8 grid so the shift is exact in binary floating point
@given(st.integers(-800, 800), st.lists(st.integers(-80, 80), min_size=2, max_size=5))
def test_argmax_invariant_under_shift(k8, raw):
    k, utils = k8 / 8, [r / 8 for r in raw]
    names = [f"r{i}" for i in range(len(utils))]
    c = _cands(names)
    u = dict(zip(names, utils))
    shifted = {n: v + k for n, v in u.items()}
    a = select_actr(c, random.Random(0), 0.0, u)
    b = select_actr(c, random.Random(0), 0.0, shifted)
    assert a.name == b.name


def test_selection_is_deterministic_for_seed():
    c = _cands(["A", "B", "C"])
    u = {"A": 1.0, "B": 1.1, "C": 0.9}
    first = [select_actr(c, random.Random(s), 0.5, u).name for s in range(50)]
    second = [select_actr(c, random.Random(s), 0.5, u).name for s in range(50)]
    assert first == second


# -- fire -----------------------------------------------------------------------------

def test_fire_delta():
    wm = WorkingMemory("actr")
    wm.add((sym("goal"), sym("step"), sym("one")), ARCH_PROV, 0)
    (p,) = rules("rule r { (goal ^step one) --> -(goal ^step one) +(goal ^step two) }", "actr")
    (inst,) = match(wm, [p])
    d = fire(wm, inst, 50, 1)
    assert d.size == (1, 1)
    assert (sym("goal"), sym("step"), sym("two")) in wm
    assert wm.meta[d.added[0]].derivation.source == 1


def test_fire_stale_is_skipped():
    wm = WorkingMemory("actr")
    eid = wm.add((sym("goal"), sym("step"), sym("one")), ARCH_PROV, 0)
    (p,) = rules("rule r { (goal ^step one) --> +(goal ^done yes) }", "actr")
    (inst,) = match(wm, [p])
    wm.remove(eid)
    assert not still_matches(wm, inst)
    assert fire(wm, inst, 50, 1) is None
    assert (sym("goal"), sym("done"), sym("yes")) not in wm


def test_fire_queues_commands():
    wm = WorkingMemory("actr")
    wm.add((sym("goal"), sym("step"), sym("one")), ARCH_PROV, 0)
    (p,) = rules("rule r { (goal ^step one) --> !retrieve retrieval { ^kind count } }", "actr")
    (inst,) = match(wm, [p])
    d = fire(wm, inst, 0, 1)
    assert [c.name for c in d.commands] == ["retrieve"]


# -- elaborate ------------------------------------------------------------------------

CHAIN = """
elaborate make-x { (?s ^superstate nil) (?s ^go yes) --> +(?s ^x yes) }
elaborate make-y { (?s ^x yes) --> +(?s ^y yes) }
"""


def test_two_wave_chain_then_retraction():
    wm = soar_wm(("S1", "go", "yes"))
    prods = rules(CHAIN)
    table = SupportTable()
    res = elaborate(wm, prods, table, 0)
    assert res.waves == 2
    assert (S1, sym("x"), sym("yes")) in wm and (S1, sym("y"), sym("yes")) in wm
    wm.remove_triple((S1, sym("go"), sym("yes")))
    elaborate(wm, prods, table, 50)
    assert (S1, sym("x"), sym("yes")) not in wm
    assert (S1, sym("y"), sym("yes")) not in wm


def test_supported_elements_have_matching_sources():
    rng = random.Random(1)
    prods = rules(CHAIN + "elaborate make-z { (?s ^y yes) -(?s ^stop yes) --> +(?s ^z yes) }")
    wm = soar_wm()
    table = SupportTable()
    for step in range(60):
        t = (S1, sym(rng.choice(["go", "stop"])), sym("yes"))
        if t in wm:
            wm.remove_triple(t)
        else:
            wm.add(t, ARCH_PROV, step)
        elaborate(wm, prods, table, step)
        for sup in table.active.values():
            assert still_matches(wm, sup.inst)
        for t in table.holders:
            assert t in wm


def test_self_defeating_rule_is_runaway():
    # the rule's product retracts its own support, so waves never settle
    prods = rules("elaborate flip { (?s ^superstate nil) -(?s ^flag yes) --> +(?s ^flag yes) }")
    with pytest.raises(RunawayElaborationError):
        elaborate(soar_wm(), prods, SupportTable(), 0, limit=20)


# -- apply_operator ---------------------------------------------------------------------

def _op_wm(name):
    wm = soar_wm(("S1", "operator", "O1"), ("O1", "name", name))
    return wm


def test_parallel_application():
    prods = rules("""
apply a1 for go { (?s ^operator ?o) (?o ^name go) --> +(?s ^left yes) }
apply a2 for go { (?s ^operator ?o) (?o ^name go) --> +(?s ^right yes) }
""")
    wm = _op_wm("go")
    res = apply_operator(wm, sym("O1"), prods, 0)
    assert not res.no_change
    assert res.waves == 1 and len(res.fired) == 2
    assert (S1, sym("left"), sym("yes")) in wm and (S1, sym("right"), sym("yes")) in wm


def test_no_application_rule_is_operator_no_change():
    prods = rules("apply a1 for other { (?s ^operator ?o) (?o ^name other) --> +(?s ^x yes) }")
    res = apply_operator(_op_wm("go"), sym("O1"), prods, 0)
    assert res.no_change


def test_create_remove_conflict_remove_wins():
    prods = rules("""
apply mk for go { (?s ^operator ?o) (?o ^name go) --> +(?s ^t yes) }
apply rm for go { (?s ^operator ?o) (?o ^name go) --> -(?s ^t yes) }
""")
    wm = _op_wm("go")
    res = apply_operator(wm, sym("O1"), prods, 0)
    assert (S1, sym("t"), sym("yes")) not in wm
    assert res.delta.conflicts == [(S1, sym("t"), sym("yes"))]


def test_application_fires_each_instantiation_once():
    prods = rules("apply inc for go { (?s ^operator ?o) (?o ^name go) --> +(?s ^n 1) }")
    wm = _op_wm("go")
    keys = set()
    apply_operator(wm, sym("O1"), prods, 0, fired_keys=keys)
    again = apply_operator(wm, sym("O1"), prods, 50, fired_keys=keys)
    assert again.fired == [] and again.no_change


def test_application_role_and_make_types():
    (p,) = rules("apply a1 for go { (?s ^operator ?o) --> +(?s ^x yes) -(?s ^y yes) }")
    assert p.role == APPLICATION and p.operator == "go"
    assert isinstance(p.actions[0], Make) and isinstance(p.actions[1], Remove)


# -- decide ---------------------------------------------------------------------------

O1, O2, O3 = sym("o1"), sym("o2"), sym("o3")


def pref(op, kind, ref=None, value=None, rule=None):
    return Preference(S1, op, kind, ref, value, rule)


def test_decide_singleton():
    d = decide([pref(O1, "acceptable")])
    assert d.kind == "select" and d.operator is O1


def test_decide_better():
    d = decide([pref(O1, "acceptable"), pref(O2, "acceptable"), pref(O1, "better", O2)])
    assert d.operator is O1


def test_decide_tie():
    d = decide([pref(O1, "acceptable"), pref(O2, "acceptable")])
    assert (d.kind, d.impasse, d.candidates) == ("impasse", "tie", (O1, O2))


def test_decide_nothing_proposed():
    d = decide([])
    assert (d.kind, d.impasse) == ("impasse", "state-no-change")


def test_decide_cycle_is_conflict():
    d = decide([pref(O1, "acceptable"), pref(O2, "acceptable"), pref(O3, "acceptable"),
                pref(O1, "better", O2), pref(O2, "better", O3), pref(O3, "better", O1)])
    assert (d.impasse, d.candidates) == ("conflict", (O1, O2, O3))


def test_decide_worst_kept_when_alone():
    d = decide([pref(O1, "acceptable"), pref(O1, "worst")])
    assert d.operator is O1


def test_decide_reject_everything():
    d = decide([pref(O1, "acceptable"), pref(O1, "reject")])
    assert d.impasse == "state-no-change"


def test_decide_softmax_uses_rl_values():
    prefs = [pref(O1, "acceptable"), pref(O2, "acceptable"),
             pref(O1, "indifferent", value=0.0, rule="a"),
             pref(O2, "indifferent", value=20.0, rule="b")]
    d = decide(prefs, random.Random(3))
    assert d.operator is O2 and d.q_values == {O1: 0.0, O2: 20.0}
    assert d.rl_rules == (("b", 20.0),)
    # values override the numbers carried on the preferences
    d = decide(prefs, random.Random(3), values={"a": 20.0, "b": 0.0})
    assert d.operator is O1


def test_decide_agrees_with_oracle_sampled():
    rng = random.Random(8)
    for k in range(3000):
        n = rng.randint(1, 4)
        ops = [O1, O2, O3, sym("o4")][:n]
        pairs = [(a, b) for a in ops for b in ops if a is not b]
        prefs = unary_prefs(ops, [rng.randrange(32) for _ in ops],
                            [rng.uniform(-2, 2) for _ in ops])
        prefs += binary_prefs(pairs, [rng.randrange(8) if rng.random() < 0.4 else 0 for _ in pairs])
        rng.shuffle(prefs)
        assert decision_tuple(decide(prefs, random.Random(k))) == decide_oracle(prefs, k)


def test_decide_deterministic_for_seed():
    prefs = [pref(o, k, value=1.0 if k == "indifferent" else None, rule=o.text)
             for o in (O1, O2, O3) for k in ("acceptable", "indifferent")]
    picks = [decide(prefs, random.Random(s)).operator for s in range(40)]
    assert picks == [decide(prefs, random.Random(s)).operator for s in range(40)]
    assert len(set(picks)) > 1
