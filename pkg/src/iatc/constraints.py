"""Constraint vocabulary and its static satisfaction semantics.

Satisfaction is a predicate on a candidate assignment; finding one is the
solver's job. Situated constraints (ask, tell and the generalisation
markers) only mean something at a position in a tree, so `satisfies`
rejects them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .types import (
    Arrow,
    Base,
    Context,
    Forall,
    Meta,
    MetaSupply,
    MonoType,
    Rigid,
    Scheme,
    SchemeMeta,
    canonical_scheme,
    fresh_meta,
    free_rigids,
    rigids_in_order,
    walk_mono,
)

__all__ = [
    "CtxRef", "EqTy", "DupTy", "InCtx", "ExtendCtx", "DupCtx", "Inst", "GenInCtx",
    "Ask", "Tell", "GenOpen", "GenClose", "Constraint", "SITUATED",
    "render", "satisfies", "free_metas", "ctx_refs", "fresh_meta", "MetaSupply",
    "SEMANTICS", "NotClosedConstraint",
]

# Duplication semantics; only the structural reading is implemented.
SEMANTICS = ("cartesian",)


@dataclass(frozen=True)
class CtxRef:
    id: int

    def __str__(self) -> str:
        return f"G{self.id}"


@dataclass(frozen=True)
class EqTy:
    left: MonoType
    right: MonoType


@dataclass(frozen=True)
class DupTy:
    src: MonoType
    out1: MonoType
    out2: MonoType


@dataclass(frozen=True)
class InCtx:
    name: str
    scheme: Scheme
    ctx: CtxRef


@dataclass(frozen=True)
class ExtendCtx:
    out: CtxRef
    base: CtxRef
    name: str
    scheme: Scheme


@dataclass(frozen=True)
class DupCtx:
    src: CtxRef
    outs: tuple[CtxRef, ...]


@dataclass(frozen=True)
class Inst:
    scheme: Scheme
    target: MonoType


@dataclass(frozen=True)
class GenInCtx:
    scheme: Scheme
    mono: MonoType
    ctx: CtxRef


@dataclass(frozen=True)
class Ask:
    name: str
    scheme: Scheme


@dataclass(frozen=True)
class Tell:
    name: str
    scheme: Scheme


@dataclass(frozen=True)
class GenOpen:
    pass


@dataclass(frozen=True)
class GenClose:
    scheme: Scheme
    mono: MonoType


Constraint = Union[EqTy, DupTy, InCtx, ExtendCtx, DupCtx, Inst, GenInCtx, Ask, Tell, GenOpen, GenClose]
SITUATED = (Ask, Tell, GenOpen, GenClose)


class NotClosedConstraint(ValueError):
    pass


def render(c: Constraint) -> str:
    """Canonical one-line text form."""
    if isinstance(c, EqTy):
        return f"{c.left} ~ {c.right}"
    if isinstance(c, DupTy):
        return f"dup {_atomic(c.src)} -> {_atomic(c.out1)} {_atomic(c.out2)}"
    if isinstance(c, InCtx):
        return f"{c.name} : {c.scheme} in {c.ctx}"
    if isinstance(c, ExtendCtx):
        return f"{c.out} := {c.base} , {c.name} : {c.scheme}"
    if isinstance(c, DupCtx):
        return f"dup {c.src} -> {' '.join(map(str, c.outs))}"
    if isinstance(c, Inst):
        return f"{c.scheme} <= {c.target}"
    if isinstance(c, GenInCtx):
        return f"{c.scheme} := gen {c.mono} in {c.ctx}"
    if isinstance(c, Ask):
        return f"ask {c.name} : {c.scheme}"
    if isinstance(c, Tell):
        return f"tell {c.name} : {c.scheme}"
    if isinstance(c, GenOpen):
        return "gen["
    if isinstance(c, GenClose):
        return f"]gen {c.scheme} := {c.mono}"
    raise TypeError(f"not a constraint: {c!r}")


def _atomic(t: MonoType) -> str:
    return f"({t})" if isinstance(t, Arrow) else str(t)


# -- metavariables ------------------------------------------------------------

def _metas_mono(t: MonoType) -> set[int]:
    return {node.id for node in walk_mono(t) if isinstance(node, Meta)}


def _metas_scheme(s: Scheme) -> set[int]:
    if isinstance(s, SchemeMeta):
        return {s.id}
    return _metas_mono(s.body)


def free_metas(x: Union[MonoType, Scheme, Constraint]) -> set[int]:
    """Metavariable ids (monotype and scheme) occurring in `x`."""
    if isinstance(x, (Meta, Rigid, Base, Arrow)):
        return _metas_mono(x)
    if isinstance(x, (Forall, SchemeMeta)):
        return _metas_scheme(x)
    if isinstance(x, EqTy):
        return _metas_mono(x.left) | _metas_mono(x.right)
    if isinstance(x, DupTy):
        return _metas_mono(x.src) | _metas_mono(x.out1) | _metas_mono(x.out2)
    if isinstance(x, (InCtx, ExtendCtx, Ask, Tell)):
        return _metas_scheme(x.scheme)
    if isinstance(x, Inst):
        return _metas_scheme(x.scheme) | _metas_mono(x.target)
    if isinstance(x, (GenInCtx, GenClose)):
        return _metas_scheme(x.scheme) | _metas_mono(x.mono)
    if isinstance(x, (DupCtx, GenOpen)):
        return set()
    raise TypeError(f"cannot collect metavariables of {x!r}")


def ctx_refs(c: Constraint) -> list[CtxRef]:
    if isinstance(c, (InCtx, GenInCtx)):
        return [c.ctx]
    if isinstance(c, ExtendCtx):
        return [c.out, c.base]
    if isinstance(c, DupCtx):
        return [c.src, *c.outs]
    return []


# -- satisfaction ---------------------------------------------------------------

Assignment = Mapping[int, Union[MonoType, Forall]]


def _apply(t: MonoType, assignment: Assignment, depth: int = 0) -> MonoType:
    if depth > 10_000:
        raise ValueError("cyclic assignment")
    if isinstance(t, Meta):
        if t.id not in assignment:
            raise KeyError(f"assignment is not total: {t} unassigned")
        value = assignment[t.id]
        if isinstance(value, Forall):
            raise TypeError(f"{t} is a monotype metavariable but is assigned a scheme")
        return _apply(value, assignment, depth + 1)
    if isinstance(t, Arrow):
        return Arrow(_apply(t.param, assignment, depth), _apply(t.result, assignment, depth))
    return t


def _apply_scheme(s: Scheme, assignment: Assignment) -> Forall:
    if isinstance(s, SchemeMeta):
        if s.id not in assignment:
            raise KeyError(f"assignment is not total: {s} unassigned")
        value = assignment[s.id]
        s = value if isinstance(value, Forall) else Forall((), value)
    return Forall(s.bound, _apply(s.body, assignment))


def _ctx(ref: CtxRef, ctx_assignment: Mapping[int, Context]) -> Context:
    if ref.id not in ctx_assignment:
        raise KeyError(f"context assignment is not total: {ref} unassigned")
    return ctx_assignment[ref.id]


def _scheme_eq(a: Forall, b: Forall) -> bool:
    return canonical_scheme(a) == canonical_scheme(b)


def _close_ctx(ctx: Context, assignment: Assignment) -> list[tuple[str, Forall]]:
    return [(name, _apply_scheme(s, assignment)) for name, s in ctx]


def match_instance(scheme: Forall, target: MonoType) -> Optional[dict[str, MonoType]]:
    """One-way matching of the scheme body against `target`, binding only bound variables."""
    binding: dict[str, MonoType] = {}
    bound = set(scheme.bound)

    def go(pattern: MonoType, t: MonoType) -> bool:
        if isinstance(pattern, Rigid) and pattern.name in bound:
            if pattern.name in binding:
                return binding[pattern.name] == t
            binding[pattern.name] = t
            return True
        if isinstance(pattern, Arrow):
            return isinstance(t, Arrow) and go(pattern.param, t.param) and go(pattern.result, t.result)
        return pattern == t

    return binding if go(scheme.body, target) else None


def generalisable(mono: MonoType, ctx: list[tuple[str, Forall]]) -> tuple[str, ...]:
    """Free rigid variables of `mono` not free in `ctx`, in first-occurrence order."""
    in_ctx: set[str] = set()
    for _, s in ctx:
        in_ctx |= free_rigids(s)
    return tuple(name for name in rigids_in_order(mono) if name not in in_ctx)


def satisfies(c: Constraint, assignment: Assignment,
              ctx_assignment: Optional[Mapping[int, Context]] = None) -> bool:
    ctx_assignment = ctx_assignment or {}
    if isinstance(c, SITUATED):
        raise NotClosedConstraint(f"not a closed constraint: {render(c)}")
    if isinstance(c, EqTy):
        return _apply(c.left, assignment) == _apply(c.right, assignment)
    if isinstance(c, DupTy):
        src = _apply(c.src, assignment)
        return _apply(c.out1, assignment) == src and _apply(c.out2, assignment) == src
    if isinstance(c, InCtx):
        ctx = _close_ctx(_ctx(c.ctx, ctx_assignment), assignment)
        found = next((s for name, s in reversed(ctx) if name == c.name), None)
        return found is not None and _scheme_eq(found, _apply_scheme(c.scheme, assignment))
    if isinstance(c, ExtendCtx):
        out = _close_ctx(_ctx(c.out, ctx_assignment), assignment)
        base = _close_ctx(_ctx(c.base, ctx_assignment), assignment)
        expected = base + [(c.name, _apply_scheme(c.scheme, assignment))]
        return len(out) == len(expected) and all(
            n1 == n2 and _scheme_eq(s1, s2) for (n1, s1), (n2, s2) in zip(out, expected))
    if isinstance(c, DupCtx):
        src = _close_ctx(_ctx(c.src, ctx_assignment), assignment)
        for ref in c.outs:
            out = _close_ctx(_ctx(ref, ctx_assignment), assignment)
            if len(out) != len(src) or not all(
                    n1 == n2 and _scheme_eq(s1, s2) for (n1, s1), (n2, s2) in zip(out, src)):
                return False
        return True
    if isinstance(c, Inst):
        return match_instance(_apply_scheme(c.scheme, assignment), _apply(c.target, assignment)) is not None
    if isinstance(c, GenInCtx):
        mono_t = _apply(c.mono, assignment)
        ctx = _close_ctx(_ctx(c.ctx, ctx_assignment), assignment)
        return _apply_scheme(c.scheme, assignment) == Forall(generalisable(mono_t, ctx), mono_t)
    raise TypeError(f"not a constraint: {c!r}")
