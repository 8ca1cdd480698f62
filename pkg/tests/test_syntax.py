import numpy as np
import pytest

from nqverify.errors import (
    ArityMismatch,
    DisjointnessError,
    DuplicateDefinition,
    NotMeasurement,
    NotPredicate,
    NotUnitary,
    ParseError,
    UnknownName,
)
from nqverify.syntax import (
    NDet,
    Seq,
    Skip,
    While,
    builtins,
    has_loop,
    parse,
    parse_program,
    pretty,
    pretty_stmt,
    qv,
    typecheck,
)
from nqverify.verifier import CORPUS_DIR

from conftest import find_loop


def test_nested_choice_is_flattened():
    a = parse_program("(skip # (abort # [q] *= X))")
    b = parse_program("((skip # abort) # [q] *= X)")
    assert isinstance(a, NDet) and len(a.branches) == 3
    assert a == b


def test_box_symbol_is_choice():
    assert parse_program("(skip □ abort)") == parse_program("(skip # abort)")


def test_sequence_is_flattened():
    s = parse_program("skip; skip; [q] :=0")
    assert isinstance(s, Seq) and len(s.children) == 3


def test_if_without_else_defaults_to_skip():
    s = parse_program("if M01[q] then [q] *= X end")
    assert s.else_branch == Skip()


@pytest.mark.parametrize("name", ["qwalk.nqpv", "errcorr.nqpv", "deutsch.nqpv", "counterexample.nqpv"])
def test_pretty_round_trip(name):
    f = parse((CORPUS_DIR / name).read_text())
    text = pretty(f)
    g = parse(text)
    assert g == f
    assert pretty(g) == text


def test_invariant_attaches_to_loop():
    f = parse((CORPUS_DIR / "qwalk.nqpv").read_text())
    proof = [d for d in f.decls if getattr(d, "body", None) is not None][0]
    loop = find_loop(proof.body)
    assert isinstance(loop, While)
    assert [t.name for t in loop.invariant.terms] == ["invN"]
    assert has_loop(proof.body)
    assert qv(proof.body) == ("q1", "q2")


def test_parse_error_reports_position_and_expected():
    with pytest.raises(ParseError) as info:
        parse_program("skip;\n  [q] X")
    err = info.value
    assert err.pos == (2, 7)
    assert "*=" in err.expected and ":=0" in err.expected


def test_parse_error_on_stray_character():
    with pytest.raises(ParseError) as info:
        parse("def x := proof [q] : { I[q] }; skip; { I[q] } end $")
    assert info.value.pos[1] > 1


def test_invariant_must_precede_while():
    with pytest.raises(ParseError):
        parse_program("{ inv: I[q] }; skip")


def check(src):
    return typecheck(parse(src), builtins())


def test_typecheck_binds_matrices():
    (p,) = check("def pf := proof [a b] : { I[a] }; [a b] *= CX; [b] *= H; { P0[b] } end")
    assert p.vars == ("a", "b")
    assert np.allclose(p.post.ops[0], np.kron(np.eye(2), np.diag([1.0, 0])))
    assert p.post.names == ("P0[b]",)
    assert np.allclose(p.body.children[0].matrix, builtins()["CX"])


@pytest.mark.parametrize(
    "src, exc",
    [
        ("def pf := proof [a] : [a] *= Foo; { I[a] } end", UnknownName),
        ("def pf := proof [a] : [a] *= CX; { I[a] } end", ArityMismatch),
        ("def pf := proof [a] : [a] *= P0; { I[a] } end", NotUnitary),
        ("def pf := proof [a] : skip; { H[a] } end", NotPredicate),
        ("def pf := proof [a] : skip; { M01[a] } end", NotPredicate),
        ("def pf := proof [a] : if H[a] then skip end; { I[a] } end", NotMeasurement),
        ("def pf := proof [a b] : [a a] *= CX; { I[a] } end", DisjointnessError),
        ("def pf := proof [a] : [b] *= X; { I[a] } end", UnknownName),
        ("def pf := proof [a] : skip; { I[a] } end\ndef pf := proof [a] : skip; { I[a] } end",
         DuplicateDefinition),
        ("def X := proof [a] : skip; { I[a] } end", DuplicateDefinition),
        ("show nothing end", UnknownName),
    ],
)
def test_typecheck_errors(src, exc):
    with pytest.raises(exc):
        check(src)


def test_typecheck_error_has_position():
    with pytest.raises(UnknownName) as info:
        check("def pf := proof [a] :\n    [a] *= Foo;\n    { I[a] }\nend")
    assert info.value.pos == (2, 5)


def test_identity_and_zero_fit_any_arity():
    (p,) = check("def pf := proof [a b c] : { I[a b] Zero[c] }; skip; { I[a b c] } end")
    assert np.allclose(p.pre.ops[0], np.eye(8))
    assert np.allclose(p.pre.ops[1], 0)


def test_generated_names_may_be_shown_before_verification():
    check("def pf := proof [a] : skip; { I[a] } end\nshow VAR3 end")


def test_pretty_stmt_indents_choice():
    text = pretty_stmt(parse_program("(skip # abort)"))
    assert text.splitlines() == ["(", "    skip", "#", "    abort", ")"]
