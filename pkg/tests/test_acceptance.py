"""Acceptance gate.  Each test is one criterion; the terminal summary (see
conftest.py) prints a PASS/FAIL line for every criterion that ran.

Run just this file with ``pytest tests/test_acceptance.py``.
"""

import functools
import itertools
import math
import os
import random
import subprocess
import sys
import time

from cogkernel import kernels
from cogkernel.core import sym
from cogkernel.declarative import SemanticStore, fan_strength, spread_actr, spread_soar
from cogkernel.dsl import format_model, parse, validate
from cogkernel.dsl.ast import ChunkDecl, WmDecl
from cogkernel.errors import CogKernelError
from cogkernel.learning import update_utilities_actr, Firing, RewardEvent
from cogkernel.procedural import (
    Command,
    Condition,
    Make,
    ProceduralMemory,
    Production,
    Remove,
    Var,
    decide,
)
from cogkernel.runtime import Runtime, config_from_model

from fuzz_models import random_valid_models
from helpers import MODELS, load, meta_reference_audit, model_and_env
from oracles import (
    binary_prefs,
    bla_oracle,
    chunk_task,
    compile_trial,
    decide_oracle,
    decision_tuple,
    em_trial,
    random_soar_graph,
    retrieval_trial,
    unary_prefs,
)

RESULTS: dict = {}
AUDITED: list = []  # runtimes to sweep with the metadata audit in C13


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(**kw):
            t0 = time.perf_counter()
            try:
                detail = fn(**kw)
            except BaseException as exc:
                msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                RESULTS[number] = (title, False, msg[:120], time.perf_counter() - t0)
                raise
            RESULTS[number] = (title, True, detail or "", time.perf_counter() - t0)
        return run
    return wrap


def _audit(rt):
    AUDITED.append(rt)
    return rt


# 1 ---------------------------------------------------------------------------------

def _chain(n):
    lines = ["mode actr", "wm { (goal ^n 0) }"]
    for i in range(n - 1):
        lines.append(f"rule s{i} {{ (goal ^n {i}) --> -(goal ^n {i}) +(goal ^n {i + 1}) }}")
    lines.append(f"rule stop {{ (goal ^n {n - 1}) --> !halt }}")
    return "\n".join(lines) + "\n"


@criterion(1, "cycle cost: n-cycle run ends at n*50 ms")
def test_c01_cycle_cost():
    t0 = time.perf_counter()
    for n in range(1, 41):
        res = _audit(Runtime(load(_chain(n)))).run()
        assert (res.reason, res.cycles) == ("halt", n)
        assert res.time == n * 50, (n, res.time)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, elapsed
    # soar decision cycles cost the same (checked outside the timed part)
    ast, env = model_and_env(MODELS / "bandit.cogm")
    res = _audit(Runtime(ast, env)).run()
    assert res.time == res.cycles * 50 == 25000
    return f"n=1..40 in {elapsed:.2f}s; 500-cycle soar bandit ends at 25000 ms"


# 2 ---------------------------------------------------------------------------------

@criterion(2, "BLA matches summation oracle within 1e-9")
def test_c02_bla_oracle():
    rng = random.Random(2)
    worst = 0.0
    for backend in kernels.backends().values():
        for _ in range(1000):
            now = rng.randint(1, 10**8)
            times = [rng.randint(0, now - 1) for _ in range(rng.randint(1, 40))]
            d = rng.uniform(0.1, 1.0)
            got = backend.bla(times, now, d)
            want = bla_oracle(times, now, d)
            worst = max(worst, abs(got - want))
            assert abs(got - want) <= 1e-9, (times, now, d, got, want)
    return f"1000 histories x {len(kernels.backends())} backends, max error {worst:.1e}"


# 3 ---------------------------------------------------------------------------------

@criterion(3, "retrieval equals brute-force argmax")
def test_c03_retrieval_argmax():
    rng = random.Random(3)
    agree = 0
    for trial in range(1000):
        res, want = retrieval_trial(rng)
        if want is None:
            assert not res.ok, trial
        else:
            assert res.ok and res.chunk.name is want[0], trial
            assert abs(res.activation - want[1]) <= 1e-9, trial
        agree += 1
    return f"{agree}/1000 agree"


# 4 ---------------------------------------------------------------------------------

def _hub_store(fan):
    sm = SemanticStore()
    for i in range(fan):
        sm.store([(sym("ref"), sym("hub")), (sym("k"), float(i))], 0)
    return sm


@criterion(4, "fan effect decreasing; soar spread monotone in depth")
def test_c04_fan_and_depth():
    src = [(sym("goal"), sym("x"), sym("hub"))]
    # with S above ln 50 the floor is never reached: strict decrease throughout
    for S in (4.0, 6.0):
        vals = [fan_strength(S, f) for f in range(1, 51)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        through_dm = [next(iter(spread_actr(src, _hub_store(f), S).values())) for f in range(1, 51)]
        assert all(a > b for a, b in zip(through_dm, through_dm[1:]))
        assert through_dm == [S - math.log(f) for f in range(1, 51)]
    # at the default S=2 the term is floored at 0: strict while positive, then flat
    vals = [fan_strength(2.0, f) for f in range(1, 51)]
    pos = [v for v in vals if v > 0]
    assert all(a > b for a, b in zip(pos, pos[1:])) and all(v == 0.0 for v in vals[len(pos):])
    rng = random.Random(4)
    for _ in range(500):
        sm, sources = random_soar_graph(rng)
        prev = {}
        for depth in range(1, 7):
            cur = spread_soar(None, sm, depth, sources=sources)
            assert all(cur.get(k, 0.0) >= v for k, v in prev.items())
            prev = cur
    return f"fan 1..50 strict for S>ln 50 (floor reached at fan {len(pos) + 1} when S=2); 500 graphs"


# 5 ---------------------------------------------------------------------------------

@criterion(5, "compiled rule end state equals sequential end state")
def test_c05_compilation():
    rng = random.Random(5)
    checked = tried = 0
    while checked < 300:
        tried += 1
        out = compile_trial(rng)
        if out is None:
            continue
        seq, one, comp = out
        assert one.snapshot() == seq.snapshot(), comp.production
        checked += 1
    return f"{checked}/{checked} pairs ({tried} drawn)"


# 6 ---------------------------------------------------------------------------------

def _created(res):
    return [i for r in res.records for i in r.impasses if i["event"] == "created"]


@criterion(6, "chunks bypass the subgoal on re-presentation")
def test_c06_chunking():
    rng = random.Random(6)
    for k in range(50):
        text, edge, want = chunk_task(rng)
        ast = load(text)
        first = _audit(Runtime(ast))
        r1 = first.run()
        assert r1.reason == "halt" and _created(r1), (k, text)
        learned = first.learned_rules()
        assert learned, k
        results1 = first.wm.values(sym("S1"), sym(edge))
        assert results1 == [want], (k, results1, want)
        second = _audit(Runtime(ast, extra_rules=learned))
        r2 = second.run()
        assert r2.reason == "halt" and _created(r2) == [], k
        assert second.wm.values(sym("S1"), sym(edge)) == results1
        fired = {f["rule"] for r in r2.records for f in r.fired}
        assert fired & {p.name for p in learned}, k
    return "50/50 tasks: zero impasses and identical results on rerun"


# 7 ---------------------------------------------------------------------------------

@criterion(7, "RL bandit converges")
def test_c07_bandit():
    t0 = time.perf_counter()
    ast, env = model_and_env(MODELS / "bandit.cogm")
    cfg = config_from_model(ast)
    assert (cfg.utility.alpha, cfg.utility.gamma) == (0.3, 0.0)
    runs = []
    for _ in range(2):
        rt = _audit(Runtime(ast, env, cfg))
        res = rt.run()
        decisions = sum(1 for r in res.records if r.operator)
        assert decisions == 500
        runs.append(([r.to_json() for r in res.records], rt.utilities()))
    assert runs[0] == runs[1]
    q = runs[0][1]
    assert abs(q["q-a"] - 1.0) <= 0.1 and q["q-a"] > q["q-b"]
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    return f"Q(a)={q['q-a']:.4f} Q(b)={q['q-b']:.4f}, deterministic, {elapsed:.2f}s for two runs"


# 8 ---------------------------------------------------------------------------------

@criterion(8, "ACT-R utility follows 10(1-0.8^n)")
def test_c08_actr_utility():
    pm = ProceduralMemory()
    pm.add(Production("r"))
    for n in range(1, 101):
        update_utilities_actr(pm, [Firing("r", n * 50)], RewardEvent(10.0, n * 50), 0.2)
        assert abs(pm.utility("r") - 10 * (1 - 0.8 ** n)) <= 1e-9, n
    # the same through the cycle loop: a rule that rewards itself each firing
    for n in (1, 2, 10, 40):
        ast = load(f"mode actr\nparams {{ alpha 0.2 egs 0 max-cycles {n} }}\nwm {{ (goal ^go yes) }}\n"
                   "rule r { (goal ^go yes) --> +(reward ^payload 10) }\n")
        rt = _audit(Runtime(ast))
        rt.run()
        assert abs(rt.pm.utility("r") - 10 * (1 - 0.8 ** n)) <= 1e-9, n
    return "n=1..100 direct, n in {1,2,10,40} through the runtime"


# 9 ---------------------------------------------------------------------------------

@criterion(9, "episodic retrieval equals linear scan")
def test_c09_episodic():
    rng = random.Random(9)
    for k in range(500):
        bad = em_trial(rng)
        assert bad == [], (k, bad[:3])
    return "500 streams x 5 cues, reconstruction exact"


# 10 --------------------------------------------------------------------------------

OPS = [sym(x) for x in ("oa", "ob", "oc", "od")]
VALUES = [0.3, -1.25, 0.7, 2.0]


def _check_decide(prefs, seed):
    got = decision_tuple(decide(prefs, random.Random(seed)))
    want = decide_oracle(prefs, seed)
    assert got == want, (prefs, got, want)


def _pairs(ops):
    return [(a, b) for a in ops for b in ops if a is not b]


@criterion(10, "preference resolution equals semantics oracle")
def test_c10_decide():
    rng = random.Random(10)
    count = 0
    # one candidate: every unary combination
    for mask in range(32):
        _check_decide(unary_prefs(OPS[:1], [mask], VALUES), mask)
        count += 1
    # two candidates: every unary and binary combination
    ops = OPS[:2]
    pairs = _pairs(ops)
    for masks in itertools.product(range(32), repeat=2):
        for codes in itertools.product(range(8), repeat=2):
            prefs = unary_prefs(ops, masks, VALUES) + binary_prefs(pairs, codes)
            _check_decide(prefs, count)
            count += 1
    # three candidates: every unary combination, random binary overlay
    ops = OPS[:3]
    pairs = _pairs(ops)
    for masks in itertools.product(range(32), repeat=3):
        codes = [rng.randrange(8) if rng.random() < 0.3 else 0 for _ in pairs]
        _check_decide(unary_prefs(ops, masks, VALUES) + binary_prefs(pairs, codes), count)
        count += 1
    # three candidates: every better/worse graph, random unary flags on top
    for codes in itertools.product(range(4), repeat=len(pairs)):
        masks = [1 | (rng.randrange(32) & ~2 if rng.random() < 0.5 else 0) for _ in ops]
        _check_decide(unary_prefs(ops, masks, VALUES) + binary_prefs(pairs, codes), count)
        count += 1
    # four candidates: sampled
    ops = OPS
    pairs = _pairs(ops)
    for _ in range(40000):
        masks = [rng.randrange(32) for _ in ops]
        codes = [rng.randrange(8) if rng.random() < 0.3 else 0 for _ in pairs]
        prefs = unary_prefs(ops, masks, [rng.uniform(-2, 2) for _ in ops]) + binary_prefs(pairs, codes)
        rng.shuffle(prefs)
        _check_decide(prefs, count)
        count += 1
    return f"{count} cases: n<=2 exhaustive, n=3 exhaustive over unary and over better/worse graphs, n=4 sampled"


# 11 --------------------------------------------------------------------------------

@criterion(11, "same seed gives byte-identical traces")
def test_c11_determinism(tmp_path):
    models = sorted(MODELS.glob("*.cogm"))
    for path in models:
        outs = []
        for k, hashseed in enumerate(("0", "12345")):
            out = tmp_path / f"{path.stem}.{k}.jsonl"
            env = dict(os.environ, PYTHONHASHSEED=hashseed)
            proc = subprocess.run([sys.executable, "-m", "cogkernel.cli", "run", str(path), "--trace", str(out)],
                                  capture_output=True, text=True, env=env)
            assert proc.returncode == 0, proc.stderr
            outs.append(out.read_bytes())
        assert outs[0] == outs[1], path.name
        assert outs[0]
    return f"{len(models)} models, two processes with different hash seeds"


# 12 --------------------------------------------------------------------------------

@criterion(12, "DSL round trip and total parser")
def test_c12_roundtrip():
    n = 0
    for ast in random_valid_models(12, 1000):
        text = format_model(ast)
        res = parse(text)
        assert res.ok and res.ast == ast, text
        assert format_model(res.ast) == text
        n += 1
    rng = random.Random(12)
    seeds = [p.read_bytes() for p in MODELS.glob("*.cogm")]
    fuzzed = 0
    for k in range(3000):
        if k % 2:
            data = bytes(rng.randrange(256) for _ in range(rng.randint(0, 300)))
        else:
            data = bytearray(rng.choice(seeds))
            for _ in range(rng.randint(1, 10)):
                i = rng.randrange(len(data) + 1)
                data[i:i + rng.randint(0, 3)] = bytes(rng.randrange(256) for _ in range(rng.randint(0, 3)))
            data = bytes(data)
        res = parse(data)
        assert res.ast is not None or not res.ok
        if res.ok:
            validate(res.ast)
        fuzzed += 1
    return f"{n} ASTs identical after print+parse; {fuzzed} byte inputs, no crash"


# 13 --------------------------------------------------------------------------------

WALL_EDGES = sorted({"activation", "base-level", "utility", "copy-of", "derivation", "substate-level",
                     "association", "accesses", "created-at", "fired-at"})


def _inject(rng, ast):
    """Add one wall violation to a valid model; returns a label."""
    kind = rng.choice(["read-meta", "write-meta", "write-status", "remove-status", "cue",
                       "wm-meta", "wm-status", "dm-slot"])
    edge = sym(rng.choice(WALL_EDGES))
    bufs = ast.buffer_names()
    if kind in ("wm-meta", "wm-status"):
        node = sym("goal" if ast.mode == "actr" else "S1")
        ast.wm.append(WmDecl(node, sym("status") if kind == "wm-status" else edge, sym("busy")))
        return kind
    if kind == "dm-slot":
        ast.dm.append(ChunkDecl(sym("wall-c"), ((rng.choice([edge, sym("status")]), 1.0),)))
        return kind
    node = sym(rng.choice([b for b in bufs if b != "reward"])) if ast.mode == "actr" else Var("s")
    head = Condition(sym("goal"), sym("k"), 1.0) if ast.mode == "actr" else Condition(Var("s"), sym("k"), 1.0)
    conds = [head]
    acts = []
    if kind == "read-meta":
        conds.append(Condition(node, edge, Var("m")))
        acts.append(Make(head.node, sym("seen"), Var("m")))
    elif kind == "write-meta":
        acts.append(rng.choice([Make, Remove])(node, edge, 1.0))
    elif kind in ("write-status", "remove-status"):
        cls = Make if kind == "write-status" else Remove
        acts.append(cls(node, sym("status"), sym(rng.choice(["free", "busy", "success", "failure"]))))
    else:
        if ast.mode == "actr":
            acts.append(Command("retrieve", "retrieval", (), ((rng.choice([edge, sym("status")]), "=", 1.0),)))
        else:
            acts.append(Command("em-query", "em", (), ((Var("s"), edge, 1.0),)))
    role = "plain" if ast.mode == "actr" else "application"
    ast.productions.append(Production("wall-breaker", role, tuple(conds), tuple(acts),
                                      operator=None if role == "plain" else "w"))
    return kind


@criterion(13, "wall: violations rejected, no data-to-metadata references")
def test_c13_wall():
    rng = random.Random(13)
    kinds = set()
    for ast in random_valid_models(13, 1000):
        kinds.add(_inject(rng, ast))
        codes = [d.code for d in validate(ast) if d.severity == "error"]
        assert "wall-violation" in codes, format_model(ast)
        # the printed form is rejected the same way
        res = parse(format_model(ast))
        assert any(d.code == "wall-violation" for d in validate(res.ast))
    # a status write the validator cannot see (edge bound at run time) is stopped by WM
    ast = load("mode actr\nwm { (goal ^which status) }\n"
               "rule sneak { (goal ^which ?e) --> +(retrieval ^?e busy) }\n")
    try:
        Runtime(ast).run()
        raise AssertionError("dynamic status write was not stopped")
    except CogKernelError:
        pass
    # audit every runtime the acceptance suite created, plus the bundled models
    for path in MODELS.glob("*.cogm"):
        model, env = model_and_env(path)
        rt = Runtime(model, env)
        rt.run()
        AUDITED.append(rt)
    problems = []
    for rt in AUDITED:
        problems += meta_reference_audit(rt) + rt.wm.audit()
    assert problems == [], problems[:5]
    return f"1000 mutated models ({len(kinds)} violation kinds) rejected; {len(AUDITED)} runtimes audited clean"


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
