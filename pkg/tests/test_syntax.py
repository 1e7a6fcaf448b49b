import pytest
from hypothesis import given

from iatc.oracle import FuzzConfig, corpus
from iatc.syntax import (
    ALam, App, Lam, Let, ParseError, Var, parse_context, parse_scheme, parse_term, parse_type,
    print_scheme, print_term,
)
from iatc.types import Arrow, Base, Forall, Rigid, mono

from strategies import open_types, schemes, terms

INT, BOOL = Base("Int"), Base("Bool")


@pytest.mark.parametrize("text, expected", [
    ("\\x. x", Lam("x", Var("x"))),
    ("(\\x. x) y", App(Lam("x", Var("x")), Var("y"))),
    ("let id = \\x. x in id id", Let("id", Lam("x", Var("x")), App(Var("id"), Var("id")))),
    ("f x y", App(App(Var("f"), Var("x")), Var("y"))),
    ("\\x : Int -> Bool. x", ALam("x", Arrow(INT, BOOL), Var("x"))),
    ("\\x. \\y. x y", Lam("x", Lam("y", App(Var("x"), Var("y"))))),
])
def test_parse_term(text, expected):
    assert parse_term(text) == expected


@pytest.mark.parametrize("text", ["\\x", "(x", "let x = y", "x )", "\\X. x", "", "let in = x in x"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_term(text)


def test_parse_error_location():
    with pytest.raises(ParseError) as info:
        parse_term("\\x y")
    err = info.value
    assert (err.line, err.column) == (1, 4)
    assert "." in err.expected


def test_schemes():
    assert parse_scheme("Int -> Int") == mono(Arrow(INT, INT))
    assert parse_scheme("forall a. a -> a") == Forall(("a",), Arrow(Rigid("a"), Rigid("a")))
    with pytest.raises(ParseError):
        parse_scheme("forall a a. a")
    assert print_scheme(Forall(("a",), Arrow(Rigid("a"), Rigid("a")))) == "forall a. a -> a"


def test_types_are_right_associative():
    assert parse_type("a -> b -> c") == Arrow(Rigid("a"), Arrow(Rigid("b"), Rigid("c")))
    assert str(parse_type("(a -> b) -> c")) == "(a -> b) -> c"


def test_contexts():
    assert list(parse_context("y : Int")) == [("y", mono(INT))]
    assert len(parse_context("")) == 0
    ctx = parse_context("f : forall a. a -> a, y : Int")
    assert [name for name, _ in ctx] == ["f", "y"]
    assert ctx.lookup("f") == Forall(("a",), Arrow(Rigid("a"), Rigid("a")))


def test_context_lookup_is_innermost():
    ctx = parse_context("x : Int, x : Bool")
    assert ctx.lookup("x") == mono(BOOL)


def test_printing():
    assert print_term(Lam("x", Var("x"))) == "\\x. x"
    assert print_term(App(App(Var("f"), Var("x")), Var("y"))) == "f x y"
    assert print_term(App(Var("f"), App(Var("x"), Var("y")))) == "f (x y)"
    assert print_term(App(Lam("x", Var("x")), Var("y"))) == "(\\x. x) y"


@given(terms)
def test_print_parse_round_trip(t):
    assert parse_term(print_term(t)) == t


@given(terms)
def test_printing_is_a_fixed_point(t):
    text = print_term(t)
    assert print_term(parse_term(text)) == text


@given(open_types)
def test_type_round_trip(t):
    assert parse_type(str(t)) == t


@given(schemes())
def test_scheme_round_trip(s):
    assert parse_scheme(print_scheme(s)) == s


def test_fuzz_corpus_round_trips():
    for t in corpus(11, 300, FuzzConfig()):
        assert parse_term(print_term(t)) == t
