"""Declarative-memory snapshots.

A snapshot is canonical JSON (one section per line) followed by a
``sha256`` line over everything above it.  Loading verifies the checksum
before touching the live stores, so a corrupt file changes nothing.
"""

from __future__ import annotations

import hashlib
import json
import math

from .core import SymbolAtom, sym
from .declarative import AccessMeta, ChunkMeta, EmEvent, EpisodicStore, SemanticStore
from .errors import ChecksumError

FORMAT = "cogkernel-dm"
VERSION = 1


def _enc(v):
    if isinstance(v, SymbolAtom):
        return ["sym", v.text]
    if isinstance(v, float):
        return ["num", v]
    if isinstance(v, str):
        return ["str", v]
    raise TypeError(f"cannot serialize {v!r}")


def _dec(x):
    tag, v = x
    if tag == "sym":
        return sym(v)
    if tag == "num":
        return float(v)
    if tag == "str":
        return v
    raise ValueError(f"bad value tag {tag!r}")


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _num(x):
    return x if isinstance(x, int) or x != int(x) else int(x)


def dumps(sm: SemanticStore, em: EpisodicStore = None) -> str:
    chunks = []
    for name in sm.names():
        content = sorted(sm.contents[name], key=lambda p: (p[0].text, _canon(_enc(p[1]))))
        m = sm.meta[name]
        chunks.append({
            "name": name.text,
            "slots": [[e.text, _enc(v)] for e, v in content],
            "accesses": [_num(t) for t in m.accesses],
            "last_retrieved": None if m.last_retrieved is None else _num(m.last_retrieved),
        })
    elements = []
    for (c, e, v), m in sorted(sm.element_meta.items(), key=lambda kv: _canon([kv[0][0].text, kv[0][1].text, _enc(kv[0][2])])):
        elements.append({"key": [c.text, e.text, _enc(v)], "accesses": [_num(t) for t in m.accesses]})
    assoc = []
    for (j, i), m in sorted(sm.assoc.items(), key=lambda kv: (kv[0][0].text, kv[0][1].text)):
        assoc.append({"source": j.text, "target": i.text, "accesses": [_num(t) for t in m.accesses]})
    lines = [
        _canon({"format": FORMAT, "version": VERSION, "mode": sm.mode}),
        _canon({"chunks": chunks}),
        _canon({"elements": elements}),
        _canon({"associations": assoc}),
    ]
    if em is not None:
        events = []
        for ev in em.events:
            t = ev.triple
            events.append({
                "triple": [t[0].text, t[1].text, _enc(t[2])],
                "added": _num(ev.added_at),
                "removed": None if math.isinf(ev.removed_at) else _num(ev.removed_at),
            })
        lines.append(_canon({"episodes": [[c, _num(t)] for c, t in em.episodes], "events": events}))
    else:
        lines.append(_canon({"episodes": [], "events": []}))
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return body + f"sha256 {digest}\n"


def loads(text: str, sm: SemanticStore, em: EpisodicStore = None) -> None:
    """Replace the contents of ``sm`` (and ``em``) with a snapshot."""
    try:
        _loads(text, sm, em)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ChecksumError):
            raise
        raise ChecksumError(f"snapshot is malformed: {e}") from None


def _loads(text: str, sm: SemanticStore, em: EpisodicStore = None) -> None:
    body, sep, tail = text.rpartition("sha256 ")
    if not sep or not tail.strip():
        raise ChecksumError("snapshot has no checksum line")
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != tail.strip():
        raise ChecksumError("snapshot checksum mismatch")
    try:
        header, chunks, elements, assoc, episodic = [json.loads(x) for x in body.splitlines()]
    except ValueError as e:
        raise ChecksumError(f"snapshot is malformed: {e}") from None
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise ChecksumError("not a cogkernel DM snapshot")
    fresh = SemanticStore(sm.mode, sm.namer)
    for c in chunks["chunks"]:
        name = sym(c["name"])
        content = frozenset((sym(e), _dec(v)) for e, v in c["slots"])
        fresh._index(name, content)
        fresh.meta[name] = ChunkMeta(subject=name, stamp=c["accesses"][-1] if c["accesses"] else 0,
                                     accesses=list(c["accesses"]), last_retrieved=c["last_retrieved"])
        fresh.namer.reserve([name.text])
    for el in elements["elements"]:
        c, e, v = el["key"]
        key = (sym(c), sym(e), _dec(v))
        fresh.element_meta[key] = AccessMeta(subject=key, stamp=el["accesses"][-1] if el["accesses"] else 0,
                                             accesses=list(el["accesses"]))
    for a in assoc["associations"]:
        key = (sym(a["source"]), sym(a["target"]))
        fresh.assoc[key] = AccessMeta(subject=key, stamp=a["accesses"][-1] if a["accesses"] else 0,
                                      accesses=list(a["accesses"]))
    new_em = None
    if em is not None:
        new_em = EpisodicStore()
        for ev in episodic["events"]:
            n, e, v = ev["triple"]
            t = (sym(n), sym(e), _dec(v))
            removed = math.inf if ev["removed"] is None else ev["removed"]
            idx = len(new_em.events)
            new_em.events.append(EmEvent(t, ev["added"], removed))
            new_em.by_triple.setdefault(t, []).append(idx)
            if removed == math.inf:
                new_em.open[t] = idx
        new_em.episodes = [(c, t) for c, t in episodic["episodes"]]
    # commit only after everything decoded
    sm.contents, sm.meta, sm.by_content = fresh.contents, fresh.meta, fresh.by_content
    sm.by_value, sm.element_meta, sm.assoc = fresh.by_value, fresh.element_meta, fresh.assoc
    if em is not None:
        em.events, em.open, em.by_triple, em.episodes = (
            new_em.events, new_em.open, new_em.by_triple, new_em.episodes)


def save_dm(path, sm: SemanticStore, em: EpisodicStore = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(sm, em))


def load_dm(path, sm: SemanticStore, em: EpisodicStore = None) -> None:
    with open(path, encoding="utf-8") as f:
        loads(f.read(), sm, em)
