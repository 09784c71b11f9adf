"""Per-cycle trace records and their canonical JSON Lines encoding."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Optional

from .core import format_triple, format_value, triple_key


@dataclass
class TraceRecord:
    cycle: int
    time: int
    phase: str
    fired: list = field(default_factory=list)  # [{"rule": str, "bindings": {var: value}}]
    added: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    buffers: dict = field(default_factory=dict)
    impasses: list = field(default_factory=list)
    learning: list = field(default_factory=list)
    retrievals: list = field(default_factory=list)
    events: list = field(default_factory=list)
    state: Optional[str] = None  # deepest state (soar)
    operator: Optional[str] = None

    def to_json(self) -> str:
        return canonical_json(asdict(self))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def fired_entry(inst) -> dict:
    return {
        "rule": inst.production.name,
        "bindings": {k: format_value(v) for k, v in sorted(inst.bindings.items())},
    }


def triples_text(triples) -> list:
    return [format_triple(t) for t in sorted(triples, key=triple_key)]


def write_trace(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(r.to_json() + "\n")


def read_trace(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(json.loads(line))
    return out


def schema() -> dict:
    text = resources.files("cogkernel.schema").joinpath("trace.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_record(record: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``record`` is malformed."""
    import jsonschema

    jsonschema.validate(record, schema())
