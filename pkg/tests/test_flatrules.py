from collections import Counter

import pytest
from hypothesis import given, settings

from iatc.constraints import CtxRef, DupCtx, EqTy, ExtendCtx, GenInCtx, InCtx, Inst, satisfies
from iatc.flatrules import (
    FlatDerivation, RuleInstance, UntraceableDerivation, check_linearity, constraint_kinds,
    contexts_from_trace, flat_to_tree, flat_to_tree_with_renaming, generate_flat, render_flat,
)
from iatc.oracle import FuzzConfig, corpus
from iatc.solver import Failed, solve_with_store
from iatc.syntax import parse_term
from iatc.treegen import Start, build_tree, render_text
from iatc.types import Arrow, Base, Context, Forall, Meta, Rigid, SchemeMeta, mono, subst_metas, metas_in_order

from strategies import stlc_terms, terms

INT, BOOL = Base("Int"), Base("Bool")
HM_CORPUS = corpus(0, 300, FuzzConfig())
STLC_CORPUS = corpus(0, 300, FuzzConfig(let_probability=0.0))


def test_variable_rule():
    d = generate_flat(parse_term("x"))
    assert d.constraints == (InCtx("x", mono(Meta(0)), CtxRef(0)),)
    assert d.root_ctx == CtxRef(0) and d.result == 0


def test_lambda_rule():
    d = generate_flat(parse_term("\\x. x"))
    assert d.constraints == (
        ExtendCtx(CtxRef(1), CtxRef(0), "x", mono(Meta(1))),
        InCtx("x", mono(Meta(2)), CtxRef(1)),
        EqTy(Meta(0), Arrow(Meta(1), Meta(2))),
    )


def test_let_rule():
    d = generate_flat(parse_term("let id = \\x. x in id"), "hm")
    let = d.trace[0]
    assert let.rule == "Let"
    assert constraint_kinds(d, let) == ["DupCtx", "GenInCtx", "ExtendCtx"]
    dup = d.constraints[let.emitted[0]]
    assert isinstance(dup, DupCtx) and len(dup.outs) == 3


def test_hm_variable_rule():
    d = generate_flat(parse_term("x"), "hm")
    assert d.constraints == (InCtx("x", SchemeMeta(1), CtxRef(0)), Inst(SchemeMeta(1), Meta(0)))


def test_rule_local_counts():
    expected = {"Var": ["InCtx"], "Lam": ["ExtendCtx", "EqTy"], "App": ["DupCtx", "EqTy"],
                "ALam": ["DupTy", "ExtendCtx", "EqTy"]}
    d = generate_flat(parse_term("(\\f. \\x : Int. f x) (\\y. y)"))
    for entry in d.trace:
        assert constraint_kinds(d, entry) == expected[entry.rule]


def test_render_prefixes_rules():
    text = render_flat(generate_flat(parse_term("\\x. x")))
    assert text.splitlines() == [
        "root G0 ; result t0",
        "Lam#0  G1 := G0 , x : t1",
        "Var#1  x : t2 in G1",
        "Lam#0  t0 ~ t1 -> t2",
    ]


def test_linearity_of_identity():
    assert check_linearity(generate_flat(parse_term("\\x. x"))).ok


def test_linearity_violation():
    d = FlatDerivation((EqTy(Meta(0), INT), EqTy(Meta(0), BOOL), EqTy(Meta(0), Meta(1))), None, 1)
    report = check_linearity(d)
    assert not report.ok
    assert [(v.variable, v.count) for v in report.violations] == [("t0", 3)]
    assert str(report.violations[0]) == "t0 occurs 3 times"


@given(terms)
def test_linearity_holds_for_generated_sets(t):
    assert check_linearity(generate_flat(t, "hm")).ok


@given(stlc_terms)
def test_linearity_holds_for_stlc(t):
    assert check_linearity(generate_flat(t, "stlc")).ok


def test_flat_to_tree_worked_example():
    t = parse_term("(\\x. x) y")
    tree = flat_to_tree(generate_flat(t), Context())
    assert tree == build_tree(t, Context(), "stlc")
    assert render_text(tree).startswith("{}\nexists t0\nexists t1\nexists t2\nt2 -> t0 ~ t1\n")


def test_flat_to_tree_variable():
    assert flat_to_tree(generate_flat(parse_term("x")), Context()) == build_tree(parse_term("x"), Context())


@given(terms)
@settings(max_examples=200)
def test_correspondence_hm(t):
    d = generate_flat(t, "hm")
    for start in (Start.MONO, Start.POLY):
        assert flat_to_tree(d, Context(), start) == build_tree(t, Context(), "hm", start)


@given(stlc_terms)
def test_correspondence_stlc(t):
    assert flat_to_tree(generate_flat(t), Context()) == build_tree(t, Context(), "stlc")


def test_untraceable_derivations():
    d = generate_flat(parse_term("\\x. x"))
    with pytest.raises(UntraceableDerivation):
        flat_to_tree(FlatDerivation(d.constraints, d.root_ctx, d.result, ()))
    broken = (d.trace[0], RuleInstance("Var", CtxRef(7), 2, (), d.trace[1].emitted, 0))
    with pytest.raises(UntraceableDerivation):
        flat_to_tree(FlatDerivation(d.constraints, d.root_ctx, d.result, broken))
    with pytest.raises(UntraceableDerivation):
        flat_to_tree(FlatDerivation(d.constraints, d.root_ctx, d.result, d.trace[:1]))


def _assignment_from_solution(d, system):
    tree, renaming = flat_to_tree_with_renaming(d, Context(), Start.MONO)
    outcome, state = solve_with_store(tree)
    if isinstance(outcome, Failed):
        return None, outcome
    store = state.store
    raw = {}
    for flat_id, tree_id in renaming.items():
        if store.entries[tree_id].kind == "poly":
            raw[flat_id] = store.zonk_scheme(SchemeMeta(tree_id))
        else:
            raw[flat_id] = store.zonk(Meta(tree_id))
    # unconstrained metavariables may take any value; pick distinct rigid names
    residual = {}
    for value in raw.values():
        body = value.body if isinstance(value, Forall) else value
        for m in metas_in_order(body):
            residual.setdefault(m, Rigid(f"r{m}"))
    assignment = {}
    for flat_id, value in raw.items():
        if isinstance(value, Forall):
            assignment[flat_id] = Forall(value.bound, subst_metas(value.body, residual))
        else:
            assignment[flat_id] = subst_metas(value, residual)
    return assignment, outcome


@pytest.mark.parametrize("system, terms_", [("stlc", STLC_CORPUS), ("hm", HM_CORPUS)])
def test_solutions_satisfy_the_flat_constraints(system, terms_):
    solved = 0
    for t in terms_:
        d = generate_flat(t, system)
        assignment, outcome = _assignment_from_solution(d, system)
        if assignment is None:
            continue
        ctxs = contexts_from_trace(d)
        for c in d.constraints:
            assert satisfies(c, assignment, ctxs), (t, c)
        solved += 1
    assert solved > 50


def test_linearity_on_corpus():
    for t in HM_CORPUS:
        assert check_linearity(generate_flat(t, "hm")).ok
