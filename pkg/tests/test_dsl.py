import random

import pytest

from cogkernel.core import sym
from cogkernel.dsl import ModelAst, check, format_model, parse, tokenize, validate
from cogkernel.procedural import COMPILED, Command, Make, Production

from fuzz_models import random_valid_models
from helpers import MODELS, diag_codes, load

MINIMAL = """mode actr
wm { (goal ^state start) }
rule stop { (goal ^state start) --> !halt }
"""


def test_minimal_model_parses():
    ast = load(MINIMAL)
    assert ast.mode == "actr"
    assert len(ast.productions) == 1
    (p,) = ast.productions
    assert p.name == "stop" and p.role == "plain"
    assert isinstance(p.actions[0], Command) and p.actions[0].name == "halt"


@pytest.mark.parametrize("path", sorted(MODELS.glob("*.cogm")), ids=lambda p: p.name)
def test_bundled_models_are_clean(path):
    _, diags = check(path.read_text(), str(path))
    assert diags == []


def test_comments_and_whitespace_are_ignored():
    a = load(MINIMAL)
    b = load("# leading\n" + MINIMAL.replace(" { ", "  {\n\t ") + "   # trailing\n")
    assert a == b


def test_unbalanced_brace_has_position():
    _, diags = check("mode actr\nrule r { (goal ^a 1) --> +(goal ^b 2)\n", "m.cogm")
    (d,) = diags
    assert d.code == "syntax" and "brace" in d.message
    assert (d.span.line, d.span.column) == (2, 8)
    assert d.format().startswith("m.cogm:2:8: error:")


def test_lexical_error_reported():
    codes = diag_codes("mode actr\nrule r { (goal ^a $) --> }\n")
    assert "lexical" in codes


def test_duplicate_rule_name():
    text = "mode actr\nrule r { (goal ^a 1) --> +(goal ^b 2) }\nrule r { (goal ^a 1) --> +(goal ^b 3) }\n"
    _, diags = check(text)
    (d,) = diags
    assert d.code == "duplicate-name" and d.span.line == 3


def test_unbound_action_variable():
    assert diag_codes("mode actr\nrule r { (goal ^a 1) --> +(goal ^b ?x) }\n") == ["unbound-variable"]


def test_negated_condition_does_not_bind():
    text = "mode actr\nrule r { (goal ^a 1) -(goal ^b ?x) --> +(goal ^c ?x) }\n"
    assert diag_codes(text) == ["unbound-variable"]


@pytest.mark.parametrize("text", [
    "mode actr\nrule r { (goal ^activation ?x) --> +(goal ^b ?x) }\n",
    "mode actr\nrule r { (goal ^a 1) --> +(goal ^utility 3) }\n",
    "mode actr\nrule r { (goal ^a 1) --> -(goal ^base-level 3) }\n",
    "mode soar\nelaborate e { (?s ^superstate nil) --> +(?s ^derivation x) }\n",
    "mode actr\nrule r { (goal ^a 1) --> +(retrieval ^status busy) }\n",
    "mode actr\nrule r { (goal ^a 1) --> !retrieve retrieval { ^accesses 3 } }\n",
    "mode actr\nwm { (goal ^created-at 5) }\n",
    "mode actr\ndm { c { ^activation 1 } }\n",
    "mode soar\napply q for x { (?s ^operator ?o) --> !em-query em { (?s ^fired-at 1) } }\n",
])
def test_metadata_wall(text):
    assert diag_codes(text) == ["wall-violation"]


def test_unknown_command_suggests_fix():
    _, diags = check("mode actr\nrule r { (goal ^a 1) --> !retrive retrieval { ^x 1 } }\n")
    (d,) = diags
    assert d.code == "unknown-command"
    assert "did you mean '!retrieve'" in d.message


def test_undeclared_buffer():
    text = "mode actr\nrule r { (goal ^a 1) --> !retrieve nowhere { ^x 1 } }\n"
    assert diag_codes(text) == ["undeclared-buffer"]


def test_mode_mismatch():
    assert diag_codes("mode soar\nrule r { (?s ^a 1) --> +(?s ^b 2) }\n") == ["mode"]


def test_unknown_param_is_only_a_warning():
    _, diags = check("mode actr\nparams { egss 0.3 }\nrule r { (goal ^a 1) --> +(goal ^b 2) }\n")
    (d,) = diags
    assert d.severity == "warning" and d.code == "param" and "'egs'" in d.message


def test_empty_model_prints_two_lines():
    text = format_model(ModelAst(mode="actr"))
    assert text.splitlines() == ["# cogkernel model v1", "mode actr"]
    assert load(text) == ModelAst(mode="actr")


def test_learned_rule_carries_provenance_comment():
    ast = load(MINIMAL)
    cond = ast.productions[0].conditions
    p = Production("stop__stop", conditions=cond, actions=(Make(sym("goal"), sym("x"), 1.0),),
                   provenance=COMPILED, origin="stop+stop", utility=1.5)
    ast.productions.append(p)
    text = format_model(ast)
    assert "# learned: compiled from stop+stop" in text
    back = load(text)
    assert back.productions[1].provenance == COMPILED
    assert back.productions[1].utility == 1.5
    assert back == ast


def test_print_parse_fixed_point_on_bundled_models():
    for path in MODELS.glob("*.cogm"):
        ast = load(path.read_text())
        text = format_model(ast)
        again = load(text)
        assert again == ast, path.name
        assert format_model(again) == text


def test_generated_models_round_trip():
    n = 0
    for ast in random_valid_models(7, 1000):
        text = format_model(ast)
        res = parse(text)
        assert res.ok, [d.format() for d in res.diagnostics]
        assert res.ast == ast, text
        assert validate(res.ast) == validate(ast)
        assert format_model(res.ast) == text
        n += 1
    assert n == 1000


def _mutate(rng, data: bytes) -> bytes:
    b = bytearray(data)
    for _ in range(rng.randint(1, 8)):
        op = rng.random()
        i = rng.randrange(len(b) + 1)
        if op < 0.3 and b:
            del b[min(i, len(b) - 1)]
        elif op < 0.6:
            b[i:i] = bytes([rng.randrange(256)])
        elif op < 0.8:
            b[i:i] = rng.choice([b"{", b"}", b"(", b")", b"-->", b"?", b"!", b"^", b'"', b"\n", b"#"])
        else:
            j = rng.randrange(len(b) + 1)
            b[i:i] = b[min(i, j):max(i, j)][:64]
    return bytes(b)


def test_parser_total_on_random_bytes():
    rng = random.Random(3)
    seeds = [p.read_bytes() for p in MODELS.glob("*.cogm")]
    for k in range(1500):
        if k % 3 == 0:
            data = bytes(rng.randrange(256) for _ in range(rng.randint(0, 200)))
        else:
            data = _mutate(rng, rng.choice(seeds))
        res = parse(data, "f.cogm")
        assert res.ast is not None or not res.ok
        for d in res.diagnostics:
            assert d.severity in ("error", "warning")
            assert d.span is None or d.span.line >= 1
        if res.ok:
            validate(res.ast)


def test_deep_nesting_terminates():
    res = parse("mode actr\nrule r { " + "(" * 50000)
    assert not res.ok


def test_tokenizer_reports_column_for_unterminated_string():
    toks, diags = tokenize('mode actr\nwm { (goal ^a "open) }\n')
    assert diags and diags[0].span.line == 2
