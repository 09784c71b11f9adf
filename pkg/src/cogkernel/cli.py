"""``cogk``: run, validate, format and inspect models.

Exit codes: 0 success, 1 diagnostics (bad model, env script or usage),
2 run failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .declarative import EpisodicStore, SemanticStore
from .dsl import format_model, has_errors, parse, validate
from .env import EnvScriptError, load_env
from .errors import CogKernelError
from .persist import load_dm, save_dm
from .runtime import RunFailure, Runtime, config_from_model
from .trace import read_trace, write_trace

OK, DIAGNOSTICS, FAILURE = 0, 1, 2


def _read(path: str):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        print(f"{path}: error: {exc.strerror or exc}", file=sys.stderr)
        return None


def _report(diags) -> None:
    for d in diags:
        print(d.format(), file=sys.stderr)


def _load_model(path: str, mode=None):
    data = _read(path)
    if data is None:
        return None
    res = parse(data, path)
    diags = list(res.diagnostics)
    ast = res.ast
    if ast is not None and res.ok:
        if mode:
            ast.mode = mode
        diags += validate(ast)
    _report(diags)
    if ast is None or has_errors(diags):
        return None
    return ast


def cmd_run(args) -> int:
    ast = _load_model(args.model, args.mode)
    if ast is None:
        return DIAGNOSTICS
    env = None
    env_path = args.env
    if env_path is None and ast.env:
        env_path = str(Path(args.model).parent / ast.env)
    if env_path is not None:
        try:
            env = load_env(env_path)
        except (OSError, EnvScriptError) as exc:
            print(f"{env_path}: error: {exc}", file=sys.stderr)
            return DIAGNOSTICS
    config = config_from_model(ast, args.mode, args.seed, args.max_cycles)
    sm = SemanticStore(config.mode)
    em = EpisodicStore()
    if args.dm_in:
        try:
            load_dm(args.dm_in, sm, em)
        except (OSError, CogKernelError) as exc:
            print(f"{args.dm_in}: error: {exc}", file=sys.stderr)
            return FAILURE
    try:
        rt = Runtime(ast, env, config, semantic=sm, episodic=em)
    except CogKernelError as exc:
        print(f"{args.model}: error: {exc}", file=sys.stderr)
        return FAILURE
    try:
        result = rt.run()
    except RunFailure as exc:
        if args.trace:
            write_trace(args.trace, exc.records)
        print(f"run failed at cycle {len(exc.records)}: {exc}", file=sys.stderr)
        return FAILURE
    if args.trace:
        write_trace(args.trace, result.records)
    if args.dm_out:
        save_dm(args.dm_out, rt.sm, rt.em)
    if args.rules_out:
        learned = type(ast)(mode=ast.mode, productions=rt.learned_rules())
        Path(args.rules_out).write_text(format_model(learned, rt.utilities()), encoding="utf-8")
    print(f"stopped: {result.reason} after {result.cycles} cycles at {result.time} ms")
    return OK


def cmd_validate(args) -> int:
    ast = _load_model(args.model)
    if ast is None:
        return DIAGNOSTICS
    print(f"{args.model}: ok")
    return OK


def cmd_fmt(args) -> int:
    data = _read(args.model)
    if data is None:
        return DIAGNOSTICS
    res = parse(data, args.model)
    if not res.ok:
        _report(res.diagnostics)
        return DIAGNOSTICS
    text = format_model(res.ast)
    original = data.decode("utf-8", errors="replace")
    if args.check:
        if text != original:
            print(f"{args.model}: not canonically formatted", file=sys.stderr)
            return DIAGNOSTICS
        return OK
    if args.write:
        if text != original:
            Path(args.model).write_text(text, encoding="utf-8")
        return OK
    sys.stdout.write(text)
    return OK


def cmd_inspect(args) -> int:
    try:
        records = read_trace(args.trace)
    except (OSError, ValueError) as exc:
        print(f"{args.trace}: error: {exc}", file=sys.stderr)
        return DIAGNOSTICS
    if args.cycle is None:
        for r in records:
            fired = ",".join(f["rule"] for f in r["fired"]) or "-"
            print(f"{r['cycle']:>5} {r['time']:>8} {r['phase']:<10} {fired}")
        return OK
    for r in records:
        if r["cycle"] == args.cycle:
            print(json.dumps(r, indent=2, sort_keys=True))
            return OK
    print(f"{args.trace}: no cycle {args.cycle}", file=sys.stderr)
    return DIAGNOSTICS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cogk", description="dual-mode cognitive kernel")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a model")
    r.add_argument("model")
    r.add_argument("--env")
    r.add_argument("--mode", choices=("actr", "soar"))
    r.add_argument("--seed", type=int)
    r.add_argument("--max-cycles", type=int)
    r.add_argument("--trace")
    r.add_argument("--dm-in")
    r.add_argument("--dm-out")
    r.add_argument("--rules-out", help="write learned rules as a model file")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="parse and check a model")
    v.add_argument("model")
    v.set_defaults(func=cmd_validate)

    f = sub.add_parser("fmt", help="print a model in canonical form")
    f.add_argument("model")
    g = f.add_mutually_exclusive_group()
    g.add_argument("--check", action="store_true", help="exit 1 if not canonical")
    g.add_argument("-w", "--write", action="store_true", help="rewrite the file in place")
    f.set_defaults(func=cmd_fmt)

    i = sub.add_parser("inspect", help="show a trace")
    i.add_argument("trace")
    i.add_argument("--cycle", type=int)
    i.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return DIAGNOSTICS if exc.code else OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
