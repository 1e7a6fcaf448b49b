import pytest
from hypothesis import given

from iatc.constraints import EqTy, satisfies
from iatc.oracle import FuzzConfig, algorithm_w, corpus, equiv_scheme
from iatc.solver import (
    Ambiguous, Failed, FailureKind, MetaStore, Solved, UnifyError, UnsolvedScheme, Verdict, check,
    classify, free_vars, generalize, infer, instantiate, solve_tree, solve_with_store, unify,
)
from iatc.syntax import parse_context, parse_scheme, parse_term, parse_type
from iatc.treegen import Quantify, Start, build_tree, build_tree_stlc, iter_nodes, render_text
from iatc.types import Arrow, Base, Context, Forall, Meta, Rigid, SchemeMeta, metas_in_order

from strategies import terms

INT, BOOL = Base("Int"), Base("Bool")
CORPUS = corpus(2, 300, FuzzConfig())

EXAMPLE_TRACE = """\
[0] exists t0 :: declare
[1] exists t1 :: declare
[2] exists t2 :: declare
[3] t2 -> t0 ~ t1 :: unify :: hoist t2 before t1; t1 := t2 -> t0
[4] branch/2 :: branch
[1, 0] exists t3 :: declare
[1, 1] exists t4 :: declare
[1, 2] t1 ~ t3 -> t4 :: unify :: t3 := t2; t4 := t0
[1, 3] tell x : t3 :: bind
[1, 4] ask x : t4 :: lookup :: t2 := t0
[2, 0] ask y : t2 :: lookup :: t0 := Int
"""


def store_with(*metas):
    store = MetaStore()
    for m in metas:
        store.declare(m)
    return store


# -- unification -------------------------------------------------------------------

def test_unify_assigns():
    store = unify(store_with(0), Meta(0), INT)
    assert store.zonk(Meta(0)) == INT


def test_unify_occurs_check():
    with pytest.raises(UnifyError) as info:
        unify(store_with(0), Meta(0), Arrow(Meta(0), INT))
    assert info.value.kind is FailureKind.OCCURS_CHECK


def test_unify_mismatch():
    for a, b in [(INT, BOOL), (INT, Arrow(INT, INT)), (Rigid("a"), INT)]:
        with pytest.raises(UnifyError) as info:
            unify(MetaStore(), a, b)
        assert info.value.kind is FailureKind.MISMATCH


def test_unify_decomposes_arrows():
    store = unify(store_with(1, 2), Arrow(Meta(1), Meta(2)), Arrow(INT, BOOL))
    assignment = {1: store.zonk(Meta(1)), 2: store.zonk(Meta(2))}
    assert assignment == {1: INT, 2: BOOL}
    assert satisfies(EqTy(Arrow(Meta(1), Meta(2)), Arrow(INT, BOOL)), assignment)


def test_later_meta_is_defined_as_earlier():
    store = unify(store_with(0, 1), Meta(0), Meta(1))
    assert store.entries[1].solution == Meta(0)
    assert store.entries[0].solution is None


def test_solutions_only_mention_earlier_entries():
    store = store_with(0, 1, 2)
    unify(store, Meta(0), Arrow(Meta(1), Meta(2)))
    assert store.discipline_violations() == []
    assert [e.meta for e in store.order] == [1, 2, 0]


def test_solved_entries_are_not_resolved():
    store = unify(store_with(0), Meta(0), INT)
    with pytest.raises(ValueError):
        store.assign(0, BOOL)


# -- instantiation and generalisation -------------------------------------------------

def test_instantiate_is_fresh():
    store = store_with(0)
    t = instantiate(store, parse_scheme("forall a. a -> a"))
    assert isinstance(t, Arrow) and t.param == t.result and t.param != Meta(0)
    assert instantiate(store, parse_scheme("Int")) == INT
    s = parse_scheme("forall a b. a -> b")
    metas = metas_in_order(instantiate(store, s)) + metas_in_order(instantiate(store, s))
    assert len(set(metas)) == 4


def test_instantiate_unsolved_scheme():
    store = MetaStore()
    store.declare(0, "poly")
    with pytest.raises(UnsolvedScheme):
        instantiate(store, SchemeMeta(0))


def test_generalize_region():
    store = MetaStore()
    mark = store.open_region()
    m = store.fresh()
    assert generalize(store, mark, Arrow(m, m)) == parse_scheme("forall a. a -> a")


def test_generalize_keeps_escaping_metas():
    store = store_with(0)
    mark = store.open_region()
    m = store.fresh()
    scheme = generalize(store, mark, Arrow(m, Meta(0)))
    assert scheme == Forall(("a",), Arrow(Rigid("a"), Meta(0)))


def test_generalize_ground_body():
    store = MetaStore()
    mark = store.open_region()
    assert generalize(store, mark, INT) == Forall((), INT)


# -- solving -------------------------------------------------------------------

def test_worked_example_with_context():
    tree = build_tree_stlc(parse_term("(\\x. x) y"), parse_context("y : Int"))
    lines = []
    outcome = solve_tree(tree, trace=lines.append)
    assert outcome == Solved(INT, outcome.tree)
    assert "\n".join(lines) + "\n" == EXAMPLE_TRACE
    assert all(q.solution is not None for q in iter_nodes(outcome.tree) if isinstance(q, Quantify))


def test_worked_example_unbound():
    outcome = solve_tree(build_tree_stlc(parse_term("(\\x. x) y")))
    assert isinstance(outcome, Failed)
    assert outcome.kind is FailureKind.UNBOUND_VARIABLE
    assert outcome.path == (2, 0)


def test_identity_is_ambiguous_in_stlc():
    outcome = infer(parse_term("\\x. x"), system="stlc")
    assert isinstance(outcome, Ambiguous)
    assert str(outcome.result) == "a -> a"
    assert len(outcome.unsolved) == 1
    assert classify(outcome) is Verdict.UNKNOWN


def test_self_application_occurs_check():
    for system in ("stlc", "hm"):
        outcome = infer(parse_term("\\x. x x"), system=system)
        assert isinstance(outcome, Failed) and outcome.kind is FailureKind.OCCURS_CHECK


def test_let_polymorphism():
    outcome = infer(parse_term("let id = \\x. x in id id"), system="hm", start=Start.POLY)
    assert isinstance(outcome, Solved)
    assert equiv_scheme(outcome.result, parse_scheme("forall a. a -> a"))


def test_scoped_generalisation():
    outcome = infer(parse_term("\\y. let f = \\x. y in f"), system="hm", start=Start.POLY)
    assert outcome.result == parse_scheme("forall a b. a -> b -> a")
    # the inner scheme leaves y's metavariable free
    tree = build_tree(parse_term("\\y. let f = \\x. y in f"), Context(), "hm", Start.MONO)
    _, state = solve_with_store(tree)
    sigma = next(q for q in iter_nodes(tree) if isinstance(q, Quantify) and q.kind == "poly")
    scheme = state.store.zonk_scheme(SchemeMeta(sigma.meta))
    assert len(scheme.bound) == 1
    assert len(metas_in_order(scheme.body)) == 1


def test_monomorphic_lambda_binder():
    outcome = infer(parse_term("\\f. f f"), system="hm")
    assert isinstance(outcome, Failed) and outcome.kind is FailureKind.OCCURS_CHECK


def test_annotations():
    outcome = infer(parse_term("\\x : Int. x"), system="stlc")
    assert outcome == Solved(Arrow(INT, INT), outcome.tree)
    assert classify(check(parse_term("\\x : Int. x"), Context(), parse_type("Int -> Int"))) is Verdict.SAT
    failed = check(parse_term("\\x : Int. x"), Context(), parse_type("Bool -> Int"))
    assert isinstance(failed, Failed) and failed.kind is FailureKind.MISMATCH


def test_annotation_mismatch_names_the_equation():
    outcome = infer(parse_term("(\\x : Int. x) y"), parse_context("y : Bool"), "stlc")
    assert isinstance(outcome, Failed)
    assert outcome.kind is FailureKind.MISMATCH
    assert outcome.path == (2, 0)
    assert outcome.message == "mismatch [2, 0] at ask y : t2: Bool ~ Int"


def test_check_mode():
    failed = check(parse_term("\\x. x"), Context(), parse_type("Int -> Bool"))
    assert isinstance(failed, Failed) and failed.kind is FailureKind.MISMATCH
    assert classify(check(parse_term("\\x. x"), Context(), parse_type("Int -> Int"))) is Verdict.SAT


def test_rigid_variables_in_context():
    outcome = infer(parse_term("f y"), parse_context("f : forall a. a -> a, y : b"), "hm", Start.MONO)
    assert outcome == Solved(Rigid("b"), outcome.tree)


def test_free_variable_analysis():
    fv = free_vars(parse_term("f (g x)"), "stlc")
    assert [name for name, _ in fv.requirements] == ["f", "g", "x"]
    assert [str(t) for _, t in fv.requirements] == ["a -> b", "c -> a", "c"]
    assert str(fv.result) == "b"
    # cross-check: inferring under the requirements gives the same type
    ctx = Context(tuple((n, Forall((), t)) for n, t in fv.requirements))
    assert str(infer(parse_term("f (g x)"), ctx, "stlc").result) == "b"


def test_free_variables_share_requirements():
    fv = free_vars(parse_term("f x x"), "stlc")
    assert dict((n, str(t)) for n, t in fv.requirements) == {"f": "a -> a -> b", "x": "a"}


def test_free_variable_conflict_is_a_mismatch():
    ctx = parse_context("h : Int -> Bool -> Int")
    fv = free_vars(parse_term("h x x"), "stlc", ctx)
    assert isinstance(fv.outcome, Failed) and fv.outcome.kind is FailureKind.MISMATCH


def test_classify():
    tree = build_tree_stlc(parse_term("y"), parse_context("y : Int"))
    assert classify(solve_tree(tree)) is Verdict.SAT
    assert classify(solve_tree(build_tree_stlc(parse_term("y")))) is Verdict.UNSAT


def test_store_discipline_on_corpus():
    for t in CORPUS:
        _, state = solve_with_store(build_tree(t, Context(), "hm", Start.POLY))
        assert state.store.discipline_violations() == []


def test_substitution_is_idempotent_on_corpus():
    for t in CORPUS:
        tree = build_tree(t, Context(), "hm", Start.MONO)
        outcome, state = solve_with_store(tree)
        if isinstance(outcome, Failed):
            continue
        once = state.store.zonk(Meta(0))
        assert state.store.zonk(once) == once


@given(terms)
def test_solver_agrees_with_algorithm_w(t):
    outcome = infer(t, Context(), "hm", Start.POLY)
    try:
        expected = algorithm_w(Context(), t)
    except Exception:
        assert classify(outcome) is not Verdict.SAT
        return
    assert isinstance(outcome, Solved)
    assert equiv_scheme(outcome.result, expected)


@given(terms)
def test_solving_is_deterministic(t):
    a = infer(t, Context(), "hm")
    b = infer(t, Context(), "hm")
    assert a == b
    assert render_text(a.tree) == render_text(b.tree)
