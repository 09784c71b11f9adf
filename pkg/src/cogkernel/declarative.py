"""Long-term declarative memory: a semantic store and an episodic store.

Activation quantities use the conventional ACT-R forms:

* base-level  ``B = ln(sum_j (now - t_j) ** -d)``, ages in seconds
* fan spread  ``S(j, i) = max(0, S - ln fan_j)`` weighted by ``1/|sources|``
* latency     ``ceil(F * exp(-A))`` ms
* blending    softmax of ``A / t`` over all matching chunks
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import kernels
from .core import (
    Chunk,
    Element,
    MetaRecord,
    SymbolAtom,
    is_innate,
    make_value,
    sym,
    triple_key,
    value_key,
)
from .errors import EmptyChunkError, UnsupportedModeError
from .wm import ACTR, SOAR, Namer

BUFFER_CLEARED = "buffer-cleared"
EXPLICIT = "explicit-command"

CUE_OPS = ("=", "!=", "<", ">", "<=", ">=", "present")


@dataclass(frozen=True)
class CueTest:
    edge: SymbolAtom
    op: str
    value: object = None

    def __post_init__(self):
        if self.op not in CUE_OPS:
            raise ValueError(f"bad cue test {self.op!r}")
        if self.op != "present" and self.value is None:
            raise ValueError(f"cue test {self.op} needs a value")

    def holds(self, values: list) -> bool:
        op = self.op
        if op == "present":
            return bool(values)
        if op == "=":
            return any(_same(v, self.value) for v in values)
        if op == "!=":
            return not any(_same(v, self.value) for v in values)
        if not isinstance(self.value, float):
            return False
        nums = [v for v in values if isinstance(v, float)]
        if op == "<":
            return any(v < self.value for v in nums)
        if op == ">":
            return any(v > self.value for v in nums)
        if op == "<=":
            return any(v <= self.value for v in nums)
        return any(v >= self.value for v in nums)


def _same(a, b) -> bool:
    if isinstance(a, SymbolAtom) or isinstance(b, SymbolAtom):
        return a is b
    return type(a) is type(b) and a == b


@dataclass(frozen=True)
class Cue:
    tests: tuple
    buffer: Optional[SymbolAtom] = None

    def __post_init__(self):
        if not self.tests:
            raise ValueError("a cue needs at least one constraint")

    @classmethod
    def of(cls, *specs, buffer=None) -> "Cue":
        """``Cue.of(("kind", "=", "count"), ("n", ">", 3), ("x", "present"))``"""
        tests = []
        for spec in specs:
            edge, op, *rest = spec
            val = make_value(rest[0]) if rest else None
            if isinstance(val, str) and op in ("=", "!="):
                val = sym(val)
            tests.append(CueTest(sym(edge) if isinstance(edge, str) else edge, op, val))
        return cls(tuple(tests), buffer)

    def violations(self, slots: dict) -> int:
        return sum(1 for t in self.tests if not t.holds(slots.get(t.edge, [])))

    def matches(self, slots: dict) -> bool:
        return all(t.holds(slots.get(t.edge, [])) for t in self.tests)


@dataclass
class RetrievalParams:
    d: float = 0.5
    tau: float = 0.0
    tau_s: float = 2.0
    F: float = 1000.0  # ms
    S: float = 2.0
    depth: int = 1
    t: float = 1.0
    inhibition_window: int = 0
    noise: float = 0.0
    partial_matching: bool = False
    mismatch_penalty: float = 1.0
    hop_decay: float = 0.5
    age_floor: float = 1.0  # ms; ages below this are clamped during scoring
    spontaneous: bool = False

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("decay d must be positive")
        if self.depth < 1:
            raise ValueError("spread depth must be >= 1")
        if self.F <= 0:
            raise ValueError("latency factor F must be positive")


def bla(accesses: Iterable, now: float, d: float = 0.5) -> float:
    """Base-level activation of an access history (times in ms).

    Returns ``-inf`` for an empty history; every access must precede ``now``.
    """
    return kernels.bla(list(accesses), now, d, 0.0)


def logistic_noise(rng: random.Random, s: float) -> float:
    if s <= 0:
        return 0.0
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return s * math.log(u / (1.0 - u))


@dataclass
class ChunkMeta(MetaRecord):
    accesses: list = field(default_factory=list)
    last_retrieved: Optional[int] = None


@dataclass
class AccessMeta(MetaRecord):
    accesses: list = field(default_factory=list)


def content_of(chunk) -> frozenset:
    if isinstance(chunk, Chunk):
        return chunk.content
    return frozenset((e if isinstance(e, SymbolAtom) else sym(e), make_value(v)) for e, v in chunk)


def slots_of(content: Iterable) -> dict:
    out: dict = {}
    for e, v in sorted(content, key=lambda p: (p[0].text, value_key(p[1]))):
        out.setdefault(e, []).append(v)
    return out


@dataclass
class RetrievalResult:
    chunk: Optional[Chunk]
    activation: Optional[float]
    latency: int
    scores: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.chunk is not None


class SemanticStore:
    def __init__(self, mode: str = ACTR, namer: Optional[Namer] = None) -> None:
        self.mode = mode
        self.namer = namer or Namer()
        self.contents: dict = {}
        self.meta: dict = {}
        self.by_content: dict = {}
        self.by_value: dict = {}
        self.element_meta: dict = {}
        self.assoc: dict = {}

    def __len__(self) -> int:
        return len(self.contents)

    def __contains__(self, name) -> bool:
        return name in self.contents

    def names(self) -> list:
        return sorted(self.contents, key=lambda a: a.text)

    def chunk(self, name: SymbolAtom) -> Chunk:
        content = self.contents[name]
        return Chunk(name, frozenset(Element(name, e, v) for e, v in content))

    def slots(self, name: SymbolAtom) -> dict:
        return slots_of(self.contents[name])

    def fan(self, value) -> int:
        return len(self.by_value.get(value, ()))

    def _index(self, name, content) -> None:
        self.contents[name] = content
        self.by_content[content] = name
        for _, v in content:
            if isinstance(v, SymbolAtom):
                self.by_value.setdefault(v, {})[name] = None

    def _unindex(self, name) -> None:
        content = self.contents.pop(name)
        if self.by_content.get(content) is name:
            del self.by_content[content]
        for _, v in content:
            bucket = self.by_value.get(v)
            if bucket is not None:
                bucket.pop(name, None)
                if not bucket:
                    del self.by_value[v]

    def store(self, chunk, now: int, cause: str = EXPLICIT, name: Optional[SymbolAtom] = None):
        """Persist a chunk, merging with identical content.

        ``chunk`` is a :class:`Chunk` or an iterable of ``(edge, value)``
        pairs (then ``name`` is used, or a fresh one minted).  Returns the
        stored name, or ``None`` when soar mode ignores a buffer clear.
        """
        if cause not in (BUFFER_CLEARED, EXPLICIT):
            raise ValueError(f"unknown storage cause {cause!r}")
        if self.mode == SOAR and cause == BUFFER_CLEARED:
            return None
        content = content_of(chunk)
        if not content:
            raise EmptyChunkError("cannot store an empty chunk")
        if isinstance(chunk, Chunk):
            name = chunk.name
        existing = self.by_content.get(content)
        if existing is not None:
            m = self.meta[existing]
            m.accesses.append(now)
            m.stamp = now
            return existing
        if name is None:
            name = self.namer.fresh("C")
        if name in self.contents:
            self._unindex(name)
            m = self.meta[name]
            m.accesses.append(now)
            m.stamp = now
        else:
            self.meta[name] = ChunkMeta(subject=name, stamp=now, accesses=[now])
        self.namer.reserve([name.text])
        self._index(name, content)
        return name

    # -- activation --------------------------------------------------------

    def base_level(self, name, now: float, params: RetrievalParams) -> float:
        return kernels.bla(self.meta[name].accesses, now, params.d, params.age_floor)

    def note_access(self, name, now: int, retrieved: bool = True) -> None:
        m = self.meta[name]
        m.accesses.append(now)
        if retrieved:
            m.last_retrieved = now
        m.stamp = now

    def touch_element(self, name, edge, value, now: int) -> None:
        """Soar: a WM copy of this DM element was tested or created."""
        key = (name, edge, value)
        if name not in self.contents or (edge, value) not in self.contents[name]:
            return
        m = self.element_meta.get(key)
        if m is None:
            m = self.element_meta[key] = AccessMeta(subject=key)
        m.accesses.append(now)
        m.stamp = now

    def note_cooccurrence(self, sources: Iterable, target, now: int) -> None:
        """ACT-R association metadata: ``source`` was in a buffer when
        ``target`` was stored or retrieved."""
        for j in sources:
            if j is target:
                continue
            key = (j, target)
            m = self.assoc.get(key)
            if m is None:
                m = self.assoc[key] = AccessMeta(subject=key)
            m.accesses.append(now)
            m.stamp = now

    def association(self, j, i, now: float, d: float = 0.5, floor_ms: float = 1.0) -> float:
        m = self.assoc.get((j, i))
        if m is None:
            return -math.inf
        return kernels.bla(m.accesses, now, d, floor_ms)

    def matching(self, cue: Cue) -> list:
        return [n for n in self.names() if cue.matches(slots_of(self.contents[n]))]

    def meta_records(self):
        yield from self.meta.values()
        yield from self.element_meta.values()
        yield from self.assoc.values()


# -- spreading activation ---------------------------------------------------

def actr_sources(wm_or_triples, sm: SemanticStore) -> list:
    if hasattr(wm_or_triples, "buffers"):
        triples = []
        for b in wm_or_triples.buffers:
            triples.extend(wm_or_triples.buffer_chunks(b))
        skip = set(wm_or_triples.buffers)
    else:
        triples = list(wm_or_triples)
        skip = set()
    seen: dict = {}
    for _, _, v in triples:
        if isinstance(v, SymbolAtom) and not is_innate(v) and v not in skip:
            if v in sm.by_value or v in sm.contents:
                seen[v] = None
    return sorted(seen, key=lambda a: a.text)


def fan_strength(S: float, fan: int) -> float:
    if fan <= 0:
        return 0.0
    return max(0.0, S - math.log(fan))


def spread_actr(wm_or_triples, sm: SemanticStore, S: float = 2.0) -> dict:
    """One-level spread from symbol values held in buffers to DM chunks."""
    sources = actr_sources(wm_or_triples, sm)
    out: dict = {}
    if not sources:
        return out
    w = 1.0 / len(sources)
    for j in sources:
        fan = sm.fan(j)
        s = fan_strength(S, fan)
        if s == 0.0:
            continue
        for i in sm.by_value.get(j, ()):
            out[i] = out.get(i, 0.0) + w * s
    return out


def soar_sources(wm) -> list:
    if wm is None:
        return []
    return sorted({m.source for m in wm.copy_of.values() if m.source is not None},
                  key=lambda a: a.text)


def spread_soar(wm, sm: SemanticStore, depth: int = 1, now: Optional[float] = None,
                hop_decay: float = 0.5, d: float = 0.5, floor_ms: float = 1.0,
                sources: Optional[Iterable] = None) -> dict:
    """Multi-hop spread from DM chunks that have copies in WM.

    Each hop follows chunk -> value-chunk edges, weighting edges by the
    recency of their element accesses (normalised per chunk) and scaling by
    ``hop_decay``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    srcs = list(sources) if sources is not None else soar_sources(wm)
    frontier = {s: 1.0 for s in srcs if s in sm.contents}
    out: dict = {}
    for _ in range(depth):
        nxt: dict = {}
        for c in sorted(frontier, key=lambda a: a.text):
            amount = frontier[c]
            edges = [(e, v) for e, v in sorted(sm.contents[c], key=lambda p: (p[0].text, value_key(p[1])))
                     if isinstance(v, SymbolAtom) and v in sm.contents]
            if not edges:
                continue
            weights = []
            for e, v in edges:
                m = sm.element_meta.get((c, e, v))
                if now is None or m is None or not m.accesses:
                    weights.append(1.0)
                else:
                    weights.append(math.exp(kernels.bla(m.accesses, now, d, floor_ms)))
            z = sum(weights)
            for (e, v), wgt in zip(edges, weights):
                nxt[v] = nxt.get(v, 0.0) + amount * (wgt / z) * hop_decay
        for v, a in nxt.items():
            out[v] = out.get(v, 0.0) + a
        frontier = nxt
        if not frontier:
            break
    return out


# -- retrieval ---------------------------------------------------------------

LATENCY_CAP_MS = 10**9  # keeps -inf thresholds and activations schedulable


def latency_ms(F: float, activation: float) -> int:
    if -activation >= math.log(LATENCY_CAP_MS / F):
        return LATENCY_CAP_MS
    return min(LATENCY_CAP_MS, int(math.ceil(F * math.exp(-activation))))


def retrieve(sm: SemanticStore, cue: Cue, params: RetrievalParams, wm=None, now: int = 0,
             rng: Optional[random.Random] = None, commit: bool = True) -> RetrievalResult:
    """Cue-based retrieval: hard constraints filter, ``bla + spread + noise``
    ranks, the retrieval threshold gates."""
    rng = rng or random.Random(0)
    cands = []
    for name in sm.names():
        slots = slots_of(sm.contents[name])
        miss = cue.violations(slots)
        if miss and not params.partial_matching:
            continue
        m = sm.meta[name]
        if (params.inhibition_window > 0 and m.last_retrieved is not None
                and now - m.last_retrieved < params.inhibition_window):
            continue
        cands.append((name, miss))
    if not cands:
        return RetrievalResult(None, None, latency_ms(params.F, params.tau))
    if wm is None:
        spread = {}
    elif sm.mode == SOAR:
        spread = spread_soar(wm, sm, params.depth, now, params.hop_decay, params.d, params.age_floor)
    else:
        spread = spread_actr(wm, sm, params.S)
    bases = kernels.bla_batch([sm.meta[n].accesses for n, _ in cands], now, params.d, params.age_floor)
    scores = {}
    for (name, miss), b in zip(cands, bases):
        a = b + spread.get(name, 0.0) - params.mismatch_penalty * miss
        a += logistic_noise(rng, params.noise)
        scores[name] = a
    best = min(scores, key=lambda n: (-scores[n], n.text))
    a = scores[best]
    if a < params.tau:
        return RetrievalResult(None, a, latency_ms(params.F, params.tau), scores)
    if commit:
        sm.note_access(best, now)
    return RetrievalResult(sm.chunk(best), a, latency_ms(params.F, a), scores)


def blend(sm: SemanticStore, cue: Cue, params: RetrievalParams, now: int = 0,
          spread: Optional[dict] = None, name: Optional[SymbolAtom] = None) -> Optional[Chunk]:
    """Synthesize a chunk from every match, weighting by ``softmax(A/t)``.

    Numeric slots are averaged; other slots take the heaviest chunk's value.
    """
    names = sm.matching(cue)
    if not names:
        return None
    spread = spread or {}
    acts = [b + spread.get(n, 0.0) for n, b in zip(
        names, kernels.bla_batch([sm.meta[n].accesses for n in names], now, params.d, params.age_floor))]
    weights = kernels.softmax_weights(acts, params.t)
    per_slot: dict = {}
    for n, w in zip(names, weights):
        for edge, vals in slots_of(sm.contents[n]).items():
            per_slot.setdefault(edge, []).append((n, w, vals))
    out = []
    for edge in sorted(per_slot, key=lambda a: a.text):
        entries = per_slot[edge]
        if all(len(v) == 1 and isinstance(v[0], float) for _, _, v in entries):
            z = sum(w for _, w, _ in entries)
            out.append((edge, sum(w * v[0] for _, w, v in entries) / z))
        else:
            n, w, vals = min(entries, key=lambda x: (-x[1], x[0].text))
            out.append((edge, vals[0]))
    node = name or sm.namer.fresh("B")
    return Chunk(node, frozenset(Element(node, e, v) for e, v in out))


def spontaneous(sm: SemanticStore, buffer_empty: bool, params: RetrievalParams,
                now: int) -> Optional[Chunk]:
    if sm.mode != ACTR:
        raise UnsupportedModeError("spontaneous retrieval is an ACT-R mechanism")
    if not params.spontaneous or not buffer_empty or not sm.contents:
        return None
    names = sm.names()
    acts = kernels.bla_batch([sm.meta[n].accesses for n in names], now, params.d, params.age_floor)
    best_i = min(range(len(names)), key=lambda i: (-acts[i], names[i].text))
    if acts[best_i] > params.tau_s:
        return sm.chunk(names[best_i])
    return None


def retrieve_by_name(sm: SemanticStore, name, now: int, depth: int = 0) -> Optional[list]:
    """Non-cued fetch.  Returns the chunk followed by its descendants up to
    ``depth`` levels (breadth-first), or ``None`` for an unknown name."""
    if sm.mode != SOAR:
        raise UnsupportedModeError("retrieval by name is a soar mechanism")
    atom = name if isinstance(name, SymbolAtom) else sym(name)
    if atom not in sm.contents:
        return None
    sm.note_access(atom, now)
    out = [sm.chunk(atom)]
    seen = {atom}
    frontier = [atom]
    for _ in range(depth):
        nxt = []
        for c in frontier:
            for _, v in sorted(sm.contents[c], key=lambda p: (p[0].text, value_key(p[1]))):
                if isinstance(v, SymbolAtom) and v in sm.contents and v not in seen:
                    seen.add(v)
                    nxt.append(v)
                    out.append(sm.chunk(v))
        frontier = nxt
    return out


# -- episodic store ------------------------------------------------------------

@dataclass
class EmEvent:
    triple: tuple
    added_at: float
    removed_at: float = math.inf


@dataclass
class Episode:
    index: int
    cycle: int
    time: float
    triples: frozenset


class EpisodicStore:
    def __init__(self) -> None:
        self.events: list = []
        self.open: dict = {}
        self.by_triple: dict = {}
        self.episodes: list = []  # (cycle, time)

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def times(self) -> list:
        return [t for _, t in self.episodes]

    def record(self, added: Iterable, removed: Iterable, cycle: int, now: float) -> None:
        if self.episodes and now < self.episodes[-1][1]:
            raise ValueError("episodes must be recorded in time order")
        for t in sorted(removed, key=triple_key):
            idx = self.open.pop(t, None)
            if idx is not None:
                self.events[idx].removed_at = now
        for t in sorted(added, key=triple_key):
            if t in self.open:
                continue
            self.open[t] = len(self.events)
            self.by_triple.setdefault(t, []).append(len(self.events))
            self.events.append(EmEvent(t, now))
        self.episodes.append((cycle, now))

    def record_snapshot(self, snapshot: frozenset, cycle: int, now: float) -> None:
        current = set(self.open)
        self.record(snapshot - current, current - snapshot, cycle, now)

    def reconstruct(self, index: int) -> frozenset:
        t = self.episodes[index][1]
        return frozenset(ev.triple for ev in self.events if ev.added_at <= t < ev.removed_at)

    def episode(self, index: int) -> Episode:
        cycle, t = self.episodes[index]
        return Episode(index, cycle, t, self.reconstruct(index))

    def scores(self, cue: Iterable) -> list:
        intervals = []
        for t in set(cue):
            for idx in self.by_triple.get(t, ()):
                ev = self.events[idx]
                intervals.append((ev.added_at, ev.removed_at))
        return kernels.episode_scores(self.times, intervals)


def em_record(em: EpisodicStore, added: Iterable, removed: Iterable, cycle: int, now: float) -> None:
    em.record(added, removed, cycle, now)


def em_retrieve(em: EpisodicStore, cue: Iterable, now: Optional[float] = None) -> Optional[Episode]:
    """Most recent full match; otherwise best partial match, newest first."""
    cue = set(cue)
    if not cue:
        raise ValueError("episodic cue must be nonempty")
    if not em.episodes:
        return None
    scores = em.scores(cue)
    full = len(cue)
    best_i, best_s = None, 0
    for i in range(len(scores) - 1, -1, -1):
        if now is not None and em.episodes[i][1] > now:
            continue
        s = scores[i]
        if s == full:
            return em.episode(i)
        if s > best_s:
            best_i, best_s = i, s
    if best_i is None:
        return None
    return em.episode(best_i)


def em_step(em: EpisodicStore, episode, direction: str) -> Optional[Episode]:
    idx = episode.index if isinstance(episode, Episode) else int(episode)
    if direction == "next":
        idx += 1
    elif direction == "prev":
        idx -= 1
    else:
        raise ValueError(f"direction must be next or prev, not {direction!r}")
    if idx < 0 or idx >= len(em.episodes):
        return None
    return em.episode(idx)
