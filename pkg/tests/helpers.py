from pathlib import Path

from cogkernel.dsl import check

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"


def load(text: str):
    """Parse and validate model text; fail the test on any error."""
    ast, diags = check(text)
    errs = [d.format() for d in diags if d.severity == "error"]
    assert not errs, "\n".join(errs)
    return ast


def diag_codes(text: str) -> list:
    _, diags = check(text)
    return [d.code for d in diags if d.severity == "error"]


def meta_reference_audit(rt) -> list:
    """Walk every object reachable from agent data (WM elements, chunks,
    rules, episodic events) and report any metadata or status record found.
    Metadata may point at agent data, never the other way round."""
    import dataclasses

    from cogkernel.core import MetaRecord, ModuleStatus

    roots = [("wm", rt.wm.elements), ("dm", rt.sm.contents), ("rules", rt.pm.rules),
             ("em", [ev.triple for ev in rt.em.events])]
    found = []
    seen = set()
    stack = list(roots)
    while stack:
        where, obj = stack.pop()
        if isinstance(obj, (str, bytes, int, float, bool, type(None))):
            continue
        if id(obj) in seen:
            continue
        seen.add(id(obj))
        if isinstance(obj, (MetaRecord, ModuleStatus)):
            found.append(f"{where}: {type(obj).__name__}")
            continue
        if isinstance(obj, dict):
            stack.extend((where, x) for kv in obj.items() for x in kv)
        elif isinstance(obj, (list, tuple, set, frozenset)):
            stack.extend((where, x) for x in obj)
        elif dataclasses.is_dataclass(obj):
            stack.extend((where, getattr(obj, f.name)) for f in dataclasses.fields(obj))
        else:
            for name in getattr(type(obj), "__slots__", ()):
                if hasattr(obj, name):
                    stack.append((where, getattr(obj, name)))
            if hasattr(obj, "__dict__"):
                stack.extend((where, v) for v in vars(obj).values())
    return found


def model_and_env(path):
    """Load a bundled model and the env script it names, if any."""
    from cogkernel.env import parse_env

    ast = load(path.read_text())
    env = parse_env((path.parent / ast.env).read_text()) if ast.env else None
    return ast, env
