import ast
from pathlib import Path

import pytest
from hypothesis import given

import iatc.oracle as oracle_module
from iatc.oracle import (
    TV, FuzzConfig, OracleError, WArrow, algorithm_m, algorithm_w, apply, compose, corpus, dump_corpus,
    equiv_scheme, load_corpus,
)
from iatc.syntax import has_let, parse_context, parse_scheme, parse_term, term_depth, term_size
from iatc.types import Base, Context, Forall

from strategies import terms

INT = Base("Int")


@pytest.mark.parametrize("ctx, term, expected", [
    ("y : Int", "(\\x. x) y", "Int"),
    ("", "let id = \\x. x in id id", "forall a. a -> a"),
    ("", "\\x. \\y. x", "forall a b. a -> b -> a"),
    ("", "\\f. \\g. \\x. f x (g x)", "forall a b c. (a -> b -> c) -> (a -> b) -> a -> c"),
    ("", "\\x : Int. x", "Int -> Int"),
    ("f : forall a. a -> a", "f f", "forall a. a -> a"),
    ("y : b", "(\\x. x) y", "b"),
])
def test_known_principal_types(ctx, term, expected):
    for algorithm in (algorithm_w, algorithm_m):
        assert equiv_scheme(algorithm(parse_context(ctx), parse_term(term)), parse_scheme(expected))


@pytest.mark.parametrize("term, kind", [
    ("\\x. x x", "occurs-check"),
    ("y", "unbound-variable"),
    ("(\\x : Int. x) (\\y. y)", "mismatch"),
])
def test_errors(term, kind):
    with pytest.raises(OracleError) as info:
        algorithm_w(Context(), parse_term(term))
    assert info.value.kind == kind


def test_equiv_scheme():
    assert equiv_scheme(parse_scheme("forall a. a -> a"), parse_scheme("forall b. b -> b"))
    assert not equiv_scheme(parse_scheme("forall a. a -> a"), parse_scheme("Int -> Int"))
    assert equiv_scheme(parse_scheme("forall a b. a -> b"), parse_scheme("forall b a. a -> b"))
    assert equiv_scheme(parse_scheme("forall a b. a -> a"), parse_scheme("forall c. c -> c"))


def test_composition_is_idempotent():
    s1 = {0: WArrow(TV(1), TV(2))}
    s2 = {1: INT, 2: TV(3)}
    s = compose(s2, s1)
    for v in range(4):
        assert apply(s, apply(s, TV(v))) == apply(s, TV(v))


@given(terms)
def test_w_and_m_agree_on_success(t):
    def run(algorithm):
        try:
            return algorithm(Context(), t)
        except OracleError:
            return None
    w, m = run(algorithm_w), run(algorithm_m)
    assert (w is None) == (m is None)
    if w is not None:
        assert equiv_scheme(w, m)


def test_corpus_is_seeded_and_bounded():
    a, b = corpus(4, 200), corpus(4, 200)
    assert a == b
    assert corpus(5, 200) != a
    assert all(term_size(t) <= 30 and term_depth(t) <= 8 for t in a)
    assert any(has_let(t) for t in a)
    assert not any(has_let(t) for t in corpus(4, 200, FuzzConfig(let_probability=0.0)))


def test_corpus_dump_round_trip():
    terms_ = corpus(9, 50)
    text = dump_corpus(9, terms_)
    assert text.splitlines()[0] == "# seed=9"
    assert load_corpus(text) == (9, terms_)


def test_oracle_is_independent_of_the_solver():
    tree = ast.parse(Path(oracle_module.__file__).read_text())
    imported = {node.module for node in ast.walk(tree) if isinstance(node, ast.ImportFrom)}
    assert not any(m and ("solver" in m or "treegen" in m or "constraints" in m) for m in imported)
