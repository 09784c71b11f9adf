"""The cognitive cycle: a deterministic discrete-event scheduler driving
working memory, procedural memory and the declarative stores.

ACT-R mode matches, selects one rule and fires it.  Soar mode elaborates,
decides on an operator, applies it, and falls into a substate on an
impasse.  Module commands run asynchronously against a simulated clock; a
busy module never blocks firing unless a rule waits on its status.
"""

from __future__ import annotations

import heapq
import logging
import random
from dataclasses import dataclass, field
from typing import Optional

from . import declarative as dm
from .core import (
    Element,
    SymbolAtom,
    format_value,
    make_value,
    sym,
    triple_key,
)
from .declarative import (
    BUFFER_CLEARED,
    EXPLICIT,
    Cue,
    EpisodicStore,
    RetrievalParams,
    SemanticStore,
)
from .env import EnvScript
from .errors import CogKernelError, HaltedError
from .learning import (
    ElementRecord,
    FiredRecord,
    Firing,
    FiringRecord,
    RewardEvent,
    UtilityParams,
    chunk_substate,
    compile_pair,
    forget_rules,
    learn_chunk,
    learn_compiled,
    update_rl_soar,
    update_utilities_actr,
)
from .procedural import (
    ACCEPTABLE,
    PLAIN,
    REJECT,
    Prefer,
    ProceduralMemory,
    Production,
    SupportTable,
    apply_operator,
    decide,
    elaborate,
    fire,
    match,
    operator_name,
    select_actr,
    select_operator_element,
)
from .trace import TraceRecord, fired_entry, triples_text
from .wm import (
    ACTR,
    OPERATOR,
    PERCEPT_BUFFERS,
    PERCEPT_PROV,
    REWARD_BUFFER,
    RETRIEVAL,
    RULE,
    SOAR,
    STATUS,
    TOP_STATE,
    CopyOf,
    Namer,
    Provenance,
    WorkingMemory,
)

log = logging.getLogger(__name__)

INITIAL_PROV = Provenance("initial")
PAYLOAD = sym("payload")
PERCEPT_FIELD = "percept"
RETRIEVED_FIELD = "retrieved"


class RunFailure(CogKernelError):
    """A run stopped on an error.  ``records`` holds the partial trace."""

    def __init__(self, cause: Exception, records: list):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.cause = cause
        self.records = records


@dataclass
class RunConfig:
    mode: str = ACTR
    seed: int = 0
    max_cycles: int = 1000
    cycle_cost: int = 50
    idle_wait: bool = False
    utility: UtilityParams = field(default_factory=UtilityParams)
    retrieval: RetrievalParams = field(default_factory=RetrievalParams)
    temperature: float = 1.0
    compile: bool = False
    chunk: bool = False
    chunk_repetitions: int = 1
    wm_forget: bool = False
    wm_forget_threshold: float = -10.0
    rule_forget: bool = False
    rule_forget_threshold: float = -10.0
    elaboration_limit: int = 100
    substate_limit: int = 10
    episodic: bool = True

    def __post_init__(self):
        if self.cycle_cost <= 0:
            raise ValueError("cycle-cost must be positive")
        if self.mode not in (ACTR, SOAR):
            raise ValueError(f"unknown mode {self.mode!r}")


def _flag(v) -> bool:
    if isinstance(v, SymbolAtom):
        v = v.text
    if isinstance(v, str):
        return v.lower() in ("on", "true", "yes", "1")
    return bool(v)


def config_from_model(model, mode: Optional[str] = None, seed: Optional[int] = None,
                      max_cycles: Optional[int] = None) -> RunConfig:
    """Build a run configuration from a model's ``params`` block, with
    command-line overrides taking precedence."""
    m = mode or model.mode or ACTR
    p = model.param
    num = lambda name, default: float(p(name, default))  # noqa: E731
    util = UtilityParams(
        alpha=num("alpha", 0.3 if m == SOAR else 0.2),
        noise=num("egs", 0.25),
        gamma=num("gamma", 0.9),
        init_utility=num("init-utility", 0.0),
    )
    ret = RetrievalParams(
        d=num("decay", 0.5),
        tau=num("rt", 0.0),
        tau_s=num("spontaneous-threshold", 2.0),
        F=num("lf", 1.0) * 1000.0,
        S=num("mas", 2.0),
        depth=int(num("spread-depth", 1)),
        t=num("blend-temperature", 1.0),
        inhibition_window=int(num("inhibition", 0)),
        noise=num("ans", 0.0),
        partial_matching=_flag(p("partial-matching", False)),
        mismatch_penalty=num("mp", 1.0),
        hop_decay=num("hop-decay", 0.5),
        spontaneous=_flag(p("spontaneous", False)),
    )
    return RunConfig(
        mode=m,
        seed=int(seed if seed is not None else num("seed", 0)),
        max_cycles=int(max_cycles if max_cycles is not None else num("max-cycles", 1000)),
        cycle_cost=int(num("cycle-cost", 50)),
        idle_wait=_flag(p("idle-wait", False)),
        utility=util,
        retrieval=ret,
        temperature=num("temperature", 1.0),
        compile=_flag(p("compile", False)),
        chunk=_flag(p("chunk", False)),
        chunk_repetitions=int(num("chunk-repetitions", 1)),
        wm_forget=_flag(p("wm-forget", False)),
        wm_forget_threshold=num("wm-forget-threshold", -10.0),
        rule_forget=_flag(p("rule-forget", False)),
        rule_forget_threshold=num("rule-forget-threshold", -10.0),
        elaboration_limit=int(num("elaboration-limit", 100)),
        substate_limit=int(num("substate-limit", 10)),
        episodic=_flag(p("episodic", True)),
    )


@dataclass
class RunResult:
    records: list
    time: int
    cycles: int
    reason: str


class Runtime:
    def __init__(self, model, env: Optional[EnvScript] = None, config: Optional[RunConfig] = None,
                 semantic: Optional[SemanticStore] = None, episodic: Optional[EpisodicStore] = None,
                 extra_rules: tuple = ()) -> None:
        self.config = config or config_from_model(model)
        cfg = self.config
        self.mode = cfg.mode
        self.env = env or EnvScript()
        self.rng = random.Random(cfg.seed)
        self.now = 0
        self.cycle = 0
        self.halted = False
        self.reason = ""
        self.records: list = []
        self._queue: list = []
        self._seq = 0
        self._inst_counter = 0

        self.namer = Namer()
        if semantic is not None:
            self.namer.reserve(n.text for n in semantic.contents)
            semantic.namer = self.namer
        self.wm = WorkingMemory(self.mode, model.buffer_names(), self.namer, 0)
        self.sm = semantic or SemanticStore(self.mode, self.namer)
        self.sm.mode = self.mode
        self.em = episodic or EpisodicStore()
        self.pm = ProceduralMemory()

        # soar bookkeeping
        self.table = SupportTable()
        self.persistent_prefs: list = []
        self.fired_keys: dict = {}
        self.op_names: dict = {}  # state -> name of its selected operator, kept for chunking
        self.rl_pending: Optional[tuple] = None
        self.reward_acc = 0.0
        self.elem_records: dict = {}
        self.fired_records: dict = {}
        self.identifiers: set = set()
        self.episode_snapshots: list = []
        self._chunk_count = 0

        # actr bookkeeping
        self.history: list = []
        self.last_firing: Optional[FiringRecord] = None

        self._rec: Optional[TraceRecord] = None
        self._cycle_start = 0
        for e in list(self.wm.elements.values()):
            self._on_add(e.id, e, Provenance(self.wm.kind_of(e.id)), 0)
        self.wm.on_add = self._on_add
        self._load(model, extra_rules)

    # -- setup ----------------------------------------------------------------

    def _load(self, model, extra_rules) -> None:
        pending = list(model.wm)
        while pending:
            left = []
            for w in pending:
                try:
                    self.wm.add(w.triple, INITIAL_PROV, 0)
                except CogKernelError:
                    left.append(w)
            if len(left) == len(pending):
                self.wm.add(left[0].triple, INITIAL_PROV, 0)  # raise the real error
            pending = left
        for c in model.dm:
            self.sm.store([(e, make_value(v)) for e, v in c.slots], 0, EXPLICIT, name=c.name)
        for prod in list(model.productions) + list(extra_rules):
            self.add_rule(prod)
        for ev in self.env.timed:
            self.schedule(ev.at, ev.kind, ev)

    def add_rule(self, prod: Production, now: int = 0) -> None:
        self.pm.add(prod, now)
        if prod.rl and prod.utility == 0.0:
            for a in prod.actions:
                if isinstance(a, Prefer) and a.value is not None:
                    self.pm.set_utility(prod.name, a.value, now)
                    break

    def schedule(self, at: int, kind: str, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (int(at), self._seq, kind, payload))

    def _next_id(self) -> int:
        self._inst_counter += 1
        return self._inst_counter

    # -- hooks ------------------------------------------------------------------

    def _on_add(self, eid, e, prov, now) -> None:
        if self.mode != SOAR:
            return
        self.identifiers.add(e.node)
        depth = None
        if prov.kind == RETRIEVAL and prov.source:
            depths = [self.elem_records[i].depth for i in prov.source if i in self.elem_records]
            depths = [d for d in depths if d is not None]
            depth = max(depths) if depths else None
        self.elem_records[eid] = ElementRecord(eid, e.triple, prov.kind, prov, now, depth)

    def _eid_depth(self, eid, levels) -> Optional[int]:
        rec = self.elem_records.get(eid)
        if rec is not None and rec.kind == RETRIEVAL and rec.depth is not None:
            return rec.depth
        e = self.wm.elements.get(eid)
        if e is None:
            return rec.depth if rec is not None else None
        st = levels.get(e.node)
        if st is None or st not in self.wm.state_info:
            return None
        return self.wm.state_info[st].depth

    def _on_fire(self, p) -> None:
        inst = p.inst
        self.pm.meta[inst.name].firings.append(self.now)
        if self.mode != SOAR:
            return
        lv = self.wm.levels()
        depths = tuple(self._eid_depth(eid, lv) for eid in inst.tested)
        for eid, d in zip(inst.tested, depths):
            rec = self.elem_records.get(eid)
            if rec is not None and rec.depth is None:
                rec.depth = d
            src = self.wm.copy_of.get(self.wm.elements[eid].node) if eid in self.wm.elements else None
            if src is not None and src.source is not None:
                e = self.wm.elements[eid]
                self.sm.touch_element(src.source, e.edge, e.value, self.now)
        known = [d for d in depths if d is not None]
        self.fired_records[inst.id] = FiredRecord(
            inst.id, inst.production, dict(p.bindings), tuple(inst.tested), depths,
            max(known) if known else 0, self.now,
        )
        self._rec.fired.append(fired_entry(inst))

    # -- stepping -------------------------------------------------------------------

    def step(self) -> TraceRecord:
        if self.halted:
            raise HaltedError(f"runtime stopped ({self.reason})")
        t0 = self.now
        rec = TraceRecord(cycle=self.cycle, time=t0, phase="fire")
        self._rec = rec
        before = self.wm.snapshot()
        try:
            if self.mode == ACTR:
                self._step_actr(rec)
            else:
                self._step_soar(rec)
        except CogKernelError:
            # keep what the failing cycle did so the partial trace shows it
            self._close(rec, before)
            self._stop("failure")
            raise
        self._close(rec, before)
        return rec

    def _close(self, rec: TraceRecord, before) -> None:
        after = self.wm.snapshot()
        rec.time = self._cycle_start
        rec.added = triples_text(after - before)
        rec.removed = triples_text(before - after)
        rec.buffers = {b.text: self.wm.buffers[b].status.state
                       for b in sorted(self.wm.buffers, key=lambda a: a.text)}
        self.records.append(rec)
        self.cycle += 1
        self._rec = None

    def run(self, max_cycles: Optional[int] = None) -> RunResult:
        limit = self.config.max_cycles if max_cycles is None else max_cycles
        try:
            while not self.halted and self.cycle < limit:
                self.step()
            if not self.halted:
                self.reason = "max-cycles"
            self.finish()
        except CogKernelError as exc:
            raise RunFailure(exc, list(self.records)) from exc
        return RunResult(self.records, self.now, self.cycle, self.reason)

    def finish(self) -> None:
        """Credit rewards still pending at the end of the run."""
        if self.mode == ACTR:
            self._consume_reward_actr(None)
        else:
            self._take_reward()
            if self.rl_pending:
                update_rl_soar(self.pm, self.rl_pending, self.reward_acc, 0.0,
                               self.config.utility.alpha, self.config.utility.gamma, self.now)
            self.rl_pending = None
            self.reward_acc = 0.0

    def _stop(self, reason: str) -> None:
        self.halted = True
        self.reason = reason

    # -- events ----------------------------------------------------------------------

    def _process_events(self, rec: TraceRecord) -> None:
        while self._queue and self._queue[0][0] <= self.now:
            at, _, kind, payload = heapq.heappop(self._queue)
            rec.events.append({"kind": kind, "at": at})
            if kind == "retrieval-complete":
                self._complete_retrieval(*payload, rec=rec)
            elif kind == "motor-complete":
                buf, resp = payload
                self.wm.set_status(buf, resp.status, self.now)
                if resp.percept is not None:
                    pbuf, slots = resp.percept
                    self._percept(pbuf, slots)
            elif kind == "percept":
                self._percept(payload.buffer, payload.slots)
            elif kind == "reward":
                self._reward(RewardEvent(payload.amount, at))
            elif kind == "halt":
                self._stop("halt")

    def _percept(self, buf, slots) -> None:
        node = self.namer.fresh("P")
        self.wm.set_field(buf, PERCEPT_FIELD, node, PERCEPT_PROV, self.now)
        for edge, value in slots:
            e = edge if isinstance(edge, SymbolAtom) else sym(edge)
            self.wm.add(Element(node, e, make_value(value)), PERCEPT_PROV, self.now)

    def _reward(self, ev: RewardEvent) -> None:
        if self.mode == ACTR:
            self._credit(ev)
        else:
            self.reward_acc += ev.amount

    def _credit(self, ev: RewardEvent) -> None:
        deltas = update_utilities_actr(self.pm, self.history, ev, self.config.utility.alpha)
        if self._rec is not None:
            for name in sorted(deltas):
                self._rec.learning.append({"kind": "utility", "rule": name, "delta": deltas[name],
                                           "utility": self.pm.utility(name)})

    def _reward_elements(self) -> list:
        node = sym(REWARD_BUFFER)
        return [e for e in self.wm.by_node_edge.get((node, PAYLOAD), {}).values()]

    def _consume_reward_actr(self, rec) -> None:
        for e in sorted(self._reward_elements(), key=lambda e: triple_key(e.triple)):
            at = self.wm.meta[e.id].created_at if e.id in self.wm.meta else self.now
            self.wm.remove(e.id)
            if isinstance(e.value, float):
                self._credit(RewardEvent(e.value, at, "rule-created"))

    def _take_reward(self) -> None:
        for e in sorted(self._reward_elements(), key=lambda e: triple_key(e.triple)):
            self.wm.remove(e.id)
            if isinstance(e.value, float):
                self.reward_acc += e.value

    # -- module commands ----------------------------------------------------------------

    def _store_cleared(self, cleared: list) -> None:
        for buf, chunks in cleared:
            for node in sorted(chunks, key=lambda a: a.text):
                content = chunks[node]
                if content:
                    self.sm.store(content, self.now, BUFFER_CLEARED)
            st = self.wm.buffers[buf].status.state
            if st in ("success", "failure"):
                self.wm.set_status(buf, "free", self.now)

    def _cue_ids(self, cmd) -> tuple:
        rec = self.fired_records.get(cmd.source)
        return tuple(rec.tested) if rec is not None else ()

    def _run_commands(self, commands: list, rec: TraceRecord, at: int) -> None:
        for cmd in commands:
            name = cmd.name
            if name == "halt":
                self._stop("halt")
            elif name in ("retrieve", "retrieve-blend"):
                self._cmd_retrieve(cmd, rec, at)
            elif name == "retrieve-name":
                self._cmd_retrieve_name(cmd, rec, at)
            elif name in ("em-query", "em-next", "em-prev"):
                self._cmd_episodic(cmd, rec, at)
            elif name == "store":
                self._cmd_store(cmd, rec, at)
            elif name == "motor":
                self._cmd_motor(cmd, rec, at)
            else:
                raise CogKernelError(f"unknown module command {name!r}")

    def _busy(self, cmd, rec) -> bool:
        b = self.wm.buffers[cmd.buffer]
        if b.status.state == "busy":
            rec.retrievals.append({"kind": cmd.name, "buffer": cmd.buffer.text, "ok": False,
                                   "chunk": None, "reason": "busy"})
            return True
        return False

    def _cmd_retrieve(self, cmd, rec, at) -> None:
        if self._busy(cmd, rec):
            return
        buf = cmd.buffer
        cue = Cue(tuple(cmd.cue), buf)
        params = self.config.retrieval
        self._store_cleared([(buf, self.wm.clear_buffer(buf))])
        self.wm.buffers[buf].cue = cue
        if cmd.name == "retrieve":
            res = dm.retrieve(self.sm, cue, params, self.wm, at, self.rng)
            chunk, latency = res.chunk, res.latency
            if chunk is not None and self.mode == ACTR:
                self.sm.note_cooccurrence(dm.actr_sources(self.wm, self.sm), chunk.name, at)
        else:
            probe = dm.retrieve(self.sm, cue, params, None, at, random.Random(0), commit=False)
            chunk = dm.blend(self.sm, cue, params, at, name=self.namer.fresh("B")) if probe.ok else None
            latency = probe.latency
        entry = {"kind": cmd.name, "buffer": buf.text, "ok": chunk is not None,
                 "chunk": None if chunk is None or cmd.name != "retrieve" else chunk.name.text}
        if self.mode == ACTR:
            entry["latency"] = latency
            self.wm.set_status(buf, "busy", self.now)
            self.schedule(at + latency, "retrieval-complete", (buf, chunk, cmd.name, ()))
        else:
            self._place(buf, [chunk] if chunk is not None else None, self._cue_ids(cmd), cmd.name)
        rec.retrievals.append(entry)

    def _complete_retrieval(self, buf, chunk, kind, cue_ids, rec=None) -> None:
        self._place(buf, [chunk] if chunk is not None else None, cue_ids, kind)

    def _place(self, buf, chunks: Optional[list], cue_ids: tuple, kind: str) -> None:
        """Copy retrieved chunks into working memory under ``buf``."""
        wm = self.wm
        if chunks is None:
            wm.set_field(buf, RETRIEVED_FIELD, None, Provenance.retrieval(cue_ids), self.now)
            wm.set_status(buf, "failure", self.now)
            return
        prov = Provenance.retrieval(cue_ids)
        copies = {}
        for c in chunks:
            copies[c.name] = self.namer.fresh("R")
        root = copies[chunks[0].name]
        wm.set_field(buf, RETRIEVED_FIELD, root, prov, self.now)
        for c in chunks:
            node = copies[c.name]
            if kind != "retrieve-blend":
                wm.copy_of[node] = CopyOf(subject=node, stamp=self.now, source=c.name)
            for el in sorted(c.elements, key=lambda x: triple_key(x.triple)):
                value = copies.get(el.value, el.value) if isinstance(el.value, SymbolAtom) else el.value
                wm.add(Element(node, el.edge, value), prov, self.now)
                if self.mode == SOAR and kind != "retrieve-blend":
                    self.sm.touch_element(c.name, el.edge, el.value, self.now)
        wm.set_status(buf, "success", self.now)

    def _cmd_retrieve_name(self, cmd, rec, at) -> None:
        target = cmd.args[0] if cmd.args else None
        chunks = dm.retrieve_by_name(self.sm, target, at, cmd.depth) if target is not None else None
        self._store_cleared([(cmd.buffer, self.wm.clear_buffer(cmd.buffer))])
        self._place(cmd.buffer, chunks, self._cue_ids(cmd), cmd.name)
        rec.retrievals.append({"kind": cmd.name, "buffer": cmd.buffer.text, "ok": chunks is not None,
                               "chunk": chunks[0].name.text if chunks else None})

    def _cmd_episodic(self, cmd, rec, at) -> None:
        buf = self.wm.buffers[cmd.buffer]
        if cmd.name == "em-query":
            ep = dm.em_retrieve(self.em, cmd.cue) if self.em.episodes else None
        elif buf.command is None:
            ep = None
        else:
            ep = dm.em_step(self.em, buf.command, "next" if cmd.name == "em-next" else "prev")
        self.wm.clear_buffer(cmd.buffer)
        cue_ids = self._cue_ids(cmd)
        prov = Provenance.retrieval(cue_ids)
        if ep is None:
            self.wm.set_field(cmd.buffer, RETRIEVED_FIELD, None, prov, self.now)
            self.wm.set_status(cmd.buffer, "failure", self.now)
        else:
            buf.command = ep.index
            root = self.namer.fresh("E")
            mapping = {TOP_STATE: root}
            for t in sorted(ep.triples, key=triple_key):
                if t[0] not in mapping:
                    mapping[t[0]] = self.namer.fresh("E")
            self.wm.set_field(cmd.buffer, RETRIEVED_FIELD, root, prov, self.now)
            for n, e, v in sorted(ep.triples, key=triple_key):
                v2 = mapping.get(v, v) if isinstance(v, SymbolAtom) else v
                self.wm.add(Element(mapping[n], e, v2), prov, self.now)
            self.wm.set_status(cmd.buffer, "success", self.now)
        rec.retrievals.append({"kind": cmd.name, "buffer": cmd.buffer.text, "ok": ep is not None,
                               "chunk": None if ep is None else f"episode-{ep.cycle}"})

    def _cmd_store(self, cmd, rec, at) -> None:
        node = cmd.args[0]
        if node in self.wm.buffers:
            content = [(e.edge, e.value) for e in self.wm.of_node(node) if e.edge.text not in
                       ("status", "percept", "command", "payload", "cue", "retrieved")]
            name = None
        else:
            content = [(e.edge, e.value) for e in self.wm.of_node(node)]
            name = node
        if not content:
            rec.retrievals.append({"kind": "store", "buffer": format_value(node), "ok": False, "chunk": None})
            return
        stored = self.sm.store(content, at, EXPLICIT, name=name)
        rec.retrievals.append({"kind": "store", "buffer": format_value(node), "ok": True,
                               "chunk": stored.text})

    def _cmd_motor(self, cmd, rec, at) -> None:
        buf = cmd.buffer
        if self.wm.buffers[buf].status.state == "busy":
            rec.events.append({"kind": "motor-rejected", "at": at})
            return
        resp = self.env.respond(cmd.args)
        self.wm.set_status(buf, "busy", self.now)
        self.schedule(at + resp.latency, "motor-complete", (buf, resp))
        rec.events.append({"kind": "motor-issued", "at": at})

    # -- ACT-R -------------------------------------------------------------------------

    def _spontaneous(self, rec) -> None:
        params = self.config.retrieval
        if not params.spontaneous:
            return
        buf = sym("retrieval")
        if buf not in self.wm.buffers or self.wm.buffers[buf].status.state == "busy":
            return
        empty = self.wm.field_value(buf, RETRIEVED_FIELD) is None
        chunk = dm.spontaneous(self.sm, empty, params, self.now)
        if chunk is not None:
            self.sm.note_access(chunk.name, self.now)
            self._place(buf, [chunk], (), "spontaneous")
            rec.retrievals.append({"kind": "spontaneous", "buffer": "retrieval", "ok": True,
                                   "chunk": chunk.name.text})

    def _step_actr(self, rec: TraceRecord) -> None:
        cfg = self.config
        rules = self.pm.active([PLAIN])
        while True:
            self._cycle_start = self.now
            self._process_events(rec)
            if self.halted:
                rec.phase = "halt"
                return
            self._consume_reward_actr(rec)
            self._spontaneous(rec)
            cands = match(self.wm, rules)
            if cands:
                break
            if cfg.idle_wait and self._queue:
                self.now = max(self.now, self._queue[0][0])
                continue
            rec.phase = "quiescent"
            self.last_firing = None
            self._stop("quiescent")
            return
        t0 = self.now
        inst = select_actr(cands, self.rng, cfg.utility.noise, self.pm.utility)
        delta = fire(self.wm, inst, t0, self._next_id())
        self.pm.meta[inst.name].firings.append(t0)
        rec.fired.append(fired_entry(inst))
        self._store_cleared(delta.cleared)
        end = t0 + cfg.cycle_cost
        self._run_commands(delta.commands, rec, end)
        self.history.append(Firing(inst.name, t0))
        current = FiringRecord(inst.production, dict(delta.plan.bindings), inst.tested_triples, t0)
        if cfg.compile and self.last_firing is not None:
            comp = compile_pair(self.last_firing, current, cfg.utility.init_utility, PERCEPT_BUFFERS)
            if comp:
                name, is_new, du = learn_compiled(self.pm, comp, self.last_firing.production.name,
                                                  cfg.utility.alpha, t0)
                rec.learning.append({"kind": "compiled" if is_new else "absorbed", "rule": name,
                                     "delta": du})
        self.last_firing = current
        self.wm.collect_orphans()
        self._gc_copies()
        self.now = end

    def _gc_copies(self) -> None:
        for node in [n for n in self.wm.copy_of if n not in self.wm.by_node]:
            del self.wm.copy_of[node]

    # -- Soar ----------------------------------------------------------------------------

    def _all_prefs(self) -> list:
        return self.table.preferences() + list(self.persistent_prefs)

    def _prefs_for(self, state) -> list:
        return [p for p in self._all_prefs() if p.state is state]

    def _acceptable(self, state) -> set:
        prefs = self._prefs_for(state)
        acc = {p.operator for p in prefs if p.kind == ACCEPTABLE}
        return acc - {p.operator for p in prefs if p.kind == REJECT}

    def _relink(self) -> None:
        links: dict = {}
        for p in self._all_prefs():
            if p.kind == ACCEPTABLE:
                links.setdefault(p.state, {})[p.operator] = None
        if links != self.wm.pref_links:
            self.wm.pref_links = links
            self.wm.version += 1

    def _rl_values(self) -> dict:
        return {n: self.pm.utility(n) for n, p in self.pm.rules.items() if p.rl}

    def _elaborate(self, rec) -> list:
        er = elaborate(self.wm, self.pm.active(), self.table, self.now, self._next_id,
                       self.config.elaboration_limit, self._on_fire)
        self._relink()
        return er.commands

    def _deselect(self, state, rec) -> None:
        info = self.wm.state_info[state]
        if info.operator_eid is not None and info.operator_eid in self.wm.elements:
            self.wm.remove(info.operator_eid)
        info.operator = None
        info.operator_eid = None
        self.fired_keys.pop(state, None)

    def _resolve(self, state, rec) -> None:
        doomed = self.wm.states[self.wm.state_info[state].depth:]
        for s in doomed:
            info = self.wm.state_info[s]
            rec.impasses.append({"event": "resolved", "state": s.text, "type": info.impasse.text,
                                 "items": [c.text for c in info.candidates]})
            self.fired_keys.pop(s, None)
        self.wm.resolve_substate(state)
        self.persistent_prefs = [p for p in self.persistent_prefs if p.state in self.wm.state_info]

    def _check_states(self, rec) -> bool:
        """Deselect stale operators and resolve substates whose impasse is
        gone, top-down.  Returns True if anything changed."""
        changed = False
        i = 0
        while i < len(self.wm.states):
            s = self.wm.states[i]
            info = self.wm.state_info[s]
            if info.operator is not None and info.operator not in self._acceptable(s):
                self._deselect(s, rec)
                changed = True
            if i + 1 < len(self.wm.states):
                sub = self.wm.states[i + 1]
                sinfo = self.wm.state_info[sub]
                if self._impasse_gone(s, sinfo):
                    self._resolve(sub, rec)
                    changed = True
            i += 1
        return changed

    def _impasse_gone(self, sup, sinfo) -> bool:
        info = self.wm.state_info[sup]
        if sinfo.impasse.text == "operator-no-change":
            return info.operator is None or info.operator is not sinfo.impasse_operator
        if info.operator is not None:
            return True
        d = decide(self._prefs_for(sup), random.Random(0), self.config.temperature, self._rl_values())
        if d.kind == "select":
            return True
        return d.impasse != sinfo.impasse.text or tuple(d.candidates) != tuple(sinfo.candidates)

    def _prune_prefs(self) -> None:
        keep = []
        for p in self.persistent_prefs:
            if p.state not in self.wm.state_info:
                continue
            if p.kind != ACCEPTABLE and p.operator not in self._acceptable(p.state):
                continue
            keep.append(p)
        self.persistent_prefs = keep

    def _substate(self, impasse, candidates, rec, impasse_operator=None) -> None:
        if len(self.wm.states) >= self.config.substate_limit:
            rec.phase = "limit"
            self._stop("substate-limit")
            return
        s = self.wm.create_substate(impasse, candidates, self.now, impasse_operator=impasse_operator)
        rec.phase = "impasse"
        rec.impasses.append({"event": "created", "state": s.text, "type": impasse,
                             "items": [c.text for c in self.wm.state_info[s].candidates]})

    def _apply(self, state, op, rec) -> list:
        keys = self.fired_keys.setdefault(state, set())
        ar = apply_operator(self.wm, op, self.pm.active(), self.now, self._next_id, self.table,
                            self.config.elaboration_limit, self._on_fire, keys)
        self._relink()
        for p in ar.delta.preferences:
            self.persistent_prefs.append(p)
        self._relink()
        self._store_cleared(ar.delta.cleared)
        if ar.no_change:
            self._substate("operator-no-change", (op,), rec, impasse_operator=op)
        return ar.delta.commands

    def _rl_select(self, d, rec) -> None:
        q_curr = sum(v for _, v in d.rl_rules)
        if self.rl_pending:
            deltas = update_rl_soar(self.pm, self.rl_pending, self.reward_acc, q_curr,
                                    self.config.utility.alpha, self.config.utility.gamma, self.now)
            for name in sorted(deltas):
                rec.learning.append({"kind": "rl", "rule": name, "delta": deltas[name],
                                     "utility": self.pm.utility(name)})
        if self.rl_pending is not None or d.rl_rules:
            self.reward_acc = 0.0
        self.rl_pending = tuple(d.rl_rules)

    def _step_soar(self, rec: TraceRecord) -> None:
        cfg = self.config
        self._cycle_start = self.now
        mark = max(self.elem_records, default=0)
        self._process_events(rec)
        if self.halted:
            rec.phase = "halt"
            return
        self._take_reward()
        commands = list(self._elaborate(rec))
        # results must be caught before a resolved impasse retracts them
        mark = self._results(rec, mark)
        if self._check_states(rec):
            commands += self._elaborate(rec)
        bottom = self.wm.states[-1]
        info = self.wm.state_info[bottom]
        if info.operator is None:
            d = decide(self._prefs_for(bottom), self.rng, cfg.temperature, self._rl_values())
            if d.kind == "select":
                rec.phase = "decide"
                if bottom is TOP_STATE:
                    self._rl_select(d, rec)
                info.operator = d.operator
                info.operator_eid = select_operator_element(self.wm, bottom, d.operator, self.now)
                self.op_names[bottom] = operator_name(self.wm, d.operator)
                self.fired_keys[bottom] = set()
                commands += self._elaborate(rec)
                commands += self._apply(bottom, d.operator, rec)
            else:
                self._substate(d.impasse, d.candidates, rec)
        else:
            rec.phase = "apply"
            commands += self._apply(bottom, info.operator, rec)
        self._run_commands(commands, rec, self.now)
        self._results(rec, mark)
        top = self.wm.states[-1]
        rec.state = top.text
        op = self.wm.state_info[top].operator
        rec.operator = op.text if op is not None else None
        self._end_of_cycle_soar(rec)
        self.now = self._cycle_start + cfg.cycle_cost

    def _results(self, rec, mark: int) -> int:
        """Find elements and preferences that substate processing created
        for shallower states; make them persistent and chunk over them.
        Returns the new high-water mark of element ids."""
        new_mark = max(self.elem_records, default=mark)
        if len(self.wm.states) < 2 and not self.fired_records:
            return new_mark
        lv = self.wm.levels()
        groups: dict = {}
        for eid in sorted(e for e in self.elem_records if e > mark):
            er = self.elem_records[eid]
            if er.kind != RULE or eid not in self.wm.elements:
                continue
            fr = self.fired_records.get(er.derivation.source)
            if fr is None or fr.depth == 0:
                continue
            d = self._eid_depth(eid, lv)
            if d is None or d >= fr.depth:
                continue
            groups.setdefault(fr.depth, ([], [], {}))[0].append(er.triple)
            groups[fr.depth][2][(RULE, fr.id)] = None
            self.table.make_persistent(er.triple)
        for p in self.table.preferences():
            fr = self._pref_source(p)
            if fr is None or fr.depth == 0:
                continue
            st = self.wm.state_info.get(p.state)
            if st is None or st.depth >= fr.depth:
                continue
            if p not in self.persistent_prefs:
                self.persistent_prefs.append(p)
                g = groups.setdefault(fr.depth, ([], [], {}))
                g[1].append(p)
                g[2][(RULE, fr.id)] = None
        self._relink()
        if not self.config.chunk:
            return new_mark
        for depth in sorted(groups):
            results, prefs, sources = groups[depth]
            if depth >= len(self.wm.states):
                continue
            sub = self.wm.states[depth]
            sinfo = self.wm.state_info[sub]
            sup = sinfo.superstate
            sup_op = self.wm.state_info[sup].operator
            self._chunk_count += 1
            out = chunk_substate(
                results, prefs, list(sources), depth, sinfo.created_at, self.elem_records,
                self.fired_records, lambda x: x in self.identifiers, sinfo.impasse.text, sup,
                sup_op, self.op_names.get(sup) if sup_op is not None else None,
                name=f"chunk-{self._chunk_count}",
            )
            if not out:
                rec.learning.append({"kind": "chunk-refused", "reason": out.reason})
                continue
            name, is_new = learn_chunk(self.pm, out.production, self.now, self.config.chunk_repetitions)
            rec.learning.append({"kind": "chunk", "rule": name, "new": is_new})
        return new_mark

    def _pref_source(self, p) -> Optional[FiredRecord]:
        return self.fired_records.get(p.source)

    def _live_ids(self) -> set:
        return {s.inst.id for s in self.table.active.values()}

    def _end_of_cycle_soar(self, rec) -> None:
        cfg = self.config
        self._prune_prefs()
        self._relink()
        self.wm.collect_orphans()
        self._gc_copies()
        self.wm.refresh_levels(self.now)
        if cfg.wm_forget:
            self.wm.forget(cfg.wm_forget_threshold, self.now, cfg.retrieval.d, True)
        if cfg.rule_forget:
            for name in forget_rules(self.pm, cfg.rule_forget_threshold, self.now, cfg.retrieval.d):
                rec.learning.append({"kind": "forgot-rule", "rule": name})
        if cfg.episodic:
            snap = self._top_snapshot()
            self.em.record_snapshot(snap, self.cycle, self._cycle_start)
            self.episode_snapshots.append(snap)
        if len(self.wm.states) == 1:
            live = set(self.wm.elements)
            self.elem_records = {k: v for k, v in self.elem_records.items() if k in live}
            keep = self._live_ids()
            self.fired_records = {k: v for k, v in self.fired_records.items() if k in keep}

    def _top_snapshot(self) -> frozenset:
        """Top-state contents for the episodic store: everything reachable
        from the top state except operator structures, module status and
        the episodic buffer's own contents."""
        wm = self.wm
        skip_nodes = {sym("em")}
        seen = {TOP_STATE}
        stack = [TOP_STATE]
        out = []
        while stack:
            n = stack.pop()
            for e in wm.of_node(n):
                if e.edge is OPERATOR or wm.kinds.get(e.id) == STATUS:
                    continue
                if n is TOP_STATE and e.value in skip_nodes:
                    continue
                out.append(e.triple)
                v = e.value
                if isinstance(v, SymbolAtom) and v not in seen and v in wm.by_node:
                    seen.add(v)
                    stack.append(v)
        return frozenset(out)

    # -- inspection -------------------------------------------------------------------

    def learned_rules(self) -> list:
        return [p for p in self.pm.active() if p.provenance != "hand-written"]

    def utilities(self) -> dict:
        return {n: self.pm.utility(n) for n in sorted(self.pm.rules)}

    def meta_records(self):
        yield from self.wm.meta.values()
        yield from self.wm.copy_of.values()
        yield from self.pm.meta_records()
        yield from self.sm.meta_records()


def run_model(model, env: Optional[EnvScript] = None, config: Optional[RunConfig] = None,
              **kw) -> RunResult:
    return Runtime(model, env, config, **kw).run()


__all__ = ["RunConfig", "RunResult", "Runtime", "RunFailure", "config_from_model", "run_model"]
