"""Flat, context-explicit constraint sets read off the typing rules.

Every rule instance records which metavariables it introduced and which
constraints it emitted. That trace drives `flat_to_tree`, which rewrites
the flat form into the telescopic tree: context duplication becomes a
branch, context extension a tell, membership an ask and generalisation
in a context a delimited region.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .constraints import (
    Ask, Constraint, CtxRef, DupCtx, DupTy, EqTy, ExtendCtx, GenClose, GenInCtx,
    GenOpen, InCtx, Inst, Tell, render,
)
from .syntax import ALam, App, Lam, Let, Term, Var
from .treegen import Branch, Constr, Quantify, Start, Telescope, TreeNode
from .types import (
    Arrow, Context, Forall, Meta, MetaSupply, MonoType, Scheme, SchemeMeta, mono, walk_mono,
)


@dataclass(frozen=True)
class RuleInstance:
    rule: str
    ctx: CtxRef
    result: int
    introduced: tuple[tuple[str, int], ...]  # role -> meta id, in introduction order
    emitted: tuple[int, ...]                 # indices into FlatDerivation.constraints
    premises: int                            # number of sub-judgments that follow in the trace

    def role(self, name: str) -> int:
        return dict(self.introduced)[name]


@dataclass(frozen=True)
class FlatDerivation:
    constraints: tuple[Constraint, ...]
    root_ctx: Optional[CtxRef]
    result: Optional[int]
    trace: tuple[RuleInstance, ...] = ()
    system: str = "stlc"


class UntraceableDerivation(ValueError):
    pass


# -- generation -----------------------------------------------------------------

@dataclass
class _FlatBuilder:
    system: str
    supply: MetaSupply = field(default_factory=MetaSupply)
    next_ctx: int = 0
    constraints: list[Constraint] = field(default_factory=list)
    trace: list[RuleInstance] = field(default_factory=list)

    def ctx(self) -> CtxRef:
        ref = CtxRef(self.next_ctx)
        self.next_ctx += 1
        return ref

    def emit(self, c: Constraint) -> int:
        self.constraints.append(c)
        return len(self.constraints) - 1

    def record(self, rule: str, ctx: CtxRef, result: int, introduced: list[tuple[str, int]],
               premises: int) -> int:
        self.trace.append(RuleInstance(rule, ctx, result, tuple(introduced), (), premises))
        return len(self.trace) - 1

    def finish(self, index: int, emitted: list[int]) -> None:
        entry = self.trace[index]
        self.trace[index] = RuleInstance(entry.rule, entry.ctx, entry.result, entry.introduced,
                                         tuple(emitted), entry.premises)

    def gen(self, t: Term, g: CtxRef, tau: int) -> None:
        if isinstance(t, Var):
            if self.system == "stlc":
                i = self.record("Var", g, tau, [], 0)
                self.finish(i, [self.emit(InCtx(t.name, mono(Meta(tau)), g))])
                return
            sigma = self.supply.fresh()
            i = self.record("Var", g, tau, [("sigma", sigma)], 0)
            emitted = [self.emit(InCtx(t.name, SchemeMeta(sigma), g)),
                       self.emit(Inst(SchemeMeta(sigma), Meta(tau)))]
            self.finish(i, emitted)
            return
        if isinstance(t, Lam):
            tp, tr = self.supply.fresh(), self.supply.fresh()
            gf = self.ctx()
            i = self.record("Lam", g, tau, [("tp", tp), ("tr", tr)], 1)
            emitted = [self.emit(ExtendCtx(gf, g, t.binder, mono(Meta(tp))))]
            self.gen(t.body, gf, tr)
            emitted.append(self.emit(EqTy(Meta(tau), Arrow(Meta(tp), Meta(tr)))))
            self.finish(i, emitted)
            return
        if isinstance(t, ALam):
            ap, af, tr = self.supply.fresh(), self.supply.fresh(), self.supply.fresh()
            gf = self.ctx()
            i = self.record("ALam", g, tau, [("tap", ap), ("taf", af), ("tr", tr)], 1)
            emitted = [self.emit(DupTy(t.annotation, Meta(ap), Meta(af))),
                       self.emit(ExtendCtx(gf, g, t.binder, mono(Meta(ap))))]
            self.gen(t.body, gf, tr)
            emitted.append(self.emit(EqTy(Meta(tau), Arrow(Meta(af), Meta(tr)))))
            self.finish(i, emitted)
            return
        if isinstance(t, App):
            tf, tp = self.supply.fresh(), self.supply.fresh()
            gf, gp = self.ctx(), self.ctx()
            i = self.record("App", g, tau, [("tf", tf), ("tp", tp)], 2)
            emitted = [self.emit(DupCtx(g, (gf, gp)))]
            self.gen(t.fun, gf, tf)
            self.gen(t.arg, gp, tp)
            emitted.append(self.emit(EqTy(Arrow(Meta(tp), Meta(tau)), Meta(tf))))
            self.finish(i, emitted)
            return
        if isinstance(t, Let):
            if self.system == "stlc":
                raise ValueError("let requires the hm system")
            sigma, tb = self.supply.fresh(), self.supply.fresh()
            gb, ggen, gt = self.ctx(), self.ctx(), self.ctx()
            gt2 = self.ctx()
            i = self.record("Let", g, tau, [("sigma", sigma), ("tb", tb)], 2)
            emitted = [self.emit(DupCtx(g, (gb, ggen, gt)))]
            self.gen(t.bound, gb, tb)
            emitted.append(self.emit(GenInCtx(SchemeMeta(sigma), Meta(tb), ggen)))
            emitted.append(self.emit(ExtendCtx(gt2, gt, t.binder, SchemeMeta(sigma))))
            self.gen(t.body, gt2, tau)
            self.finish(i, emitted)
            return
        raise TypeError(f"not a term: {t!r}")


def generate_flat(t: Term, system: str = "stlc") -> FlatDerivation:
    if system not in ("stlc", "hm"):
        raise ValueError(f"unknown system {system!r}")
    b = _FlatBuilder(system)
    root = b.ctx()
    tau = b.supply.fresh()
    b.gen(t, root, tau)
    return FlatDerivation(tuple(b.constraints), root, tau, tuple(b.trace), system)


# -- linearity --------------------------------------------------------------------

def _mono_occurrences(t: MonoType) -> list[str]:
    return [f"t{n.id}" for n in walk_mono(t) if isinstance(n, Meta)]


def _scheme_occurrences(s: Scheme) -> list[str]:
    if isinstance(s, SchemeMeta):
        return [f"s{s.id}"]
    return _mono_occurrences(s.body)


def occurrences(c: Constraint) -> list[str]:
    """Metavariable and context-reference occurrences of `c`, with multiplicity."""
    if isinstance(c, EqTy):
        return _mono_occurrences(c.left) + _mono_occurrences(c.right)
    if isinstance(c, DupTy):
        return _mono_occurrences(c.src) + _mono_occurrences(c.out1) + _mono_occurrences(c.out2)
    if isinstance(c, InCtx):
        return _scheme_occurrences(c.scheme) + [str(c.ctx)]
    if isinstance(c, ExtendCtx):
        return [str(c.out), str(c.base)] + _scheme_occurrences(c.scheme)
    if isinstance(c, DupCtx):
        return [str(c.src)] + [str(o) for o in c.outs]
    if isinstance(c, Inst):
        return _scheme_occurrences(c.scheme) + _mono_occurrences(c.target)
    if isinstance(c, GenInCtx):
        return _scheme_occurrences(c.scheme) + _mono_occurrences(c.mono) + [str(c.ctx)]
    raise ValueError(f"situated constraint in a flat derivation: {render(c)}")


@dataclass(frozen=True)
class Violation:
    variable: str
    count: int

    def __str__(self) -> str:
        return f"{self.variable} occurs {self.count} times"


@dataclass(frozen=True)
class LinearityReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_linearity(d: FlatDerivation) -> LinearityReport:
    """Every metavariable and context reference must occur exactly twice (one source, one sink)."""
    counts: Counter[str] = Counter()
    for c in d.constraints:
        counts.update(occurrences(c))
    if d.root_ctx is not None:
        counts[str(d.root_ctx)] += 1
    if d.result is not None:
        counts[f"t{d.result}"] += 1
    bad = tuple(Violation(v, n) for v, n in sorted(counts.items(), key=lambda kv: _sort_key(kv[0])) if n != 2)
    return LinearityReport(bad)


def _sort_key(name: str) -> tuple[str, int]:
    return name[0], int(name[1:])


# -- flat to tree ------------------------------------------------------------------

_ARITY = {"Var": 0, "Lam": 1, "ALam": 1, "App": 2, "Let": 2}
_SHAPES = {
    ("stlc", "Var"): (InCtx,),
    ("hm", "Var"): (InCtx, Inst),
    ("stlc", "Lam"): (ExtendCtx, EqTy), ("hm", "Lam"): (ExtendCtx, EqTy),
    ("stlc", "ALam"): (DupTy, ExtendCtx, EqTy), ("hm", "ALam"): (DupTy, ExtendCtx, EqTy),
    ("stlc", "App"): (DupCtx, EqTy), ("hm", "App"): (DupCtx, EqTy),
    ("hm", "Let"): (DupCtx, GenInCtx, ExtendCtx),
}


class _Rewriter:
    def __init__(self, d: FlatDerivation, supply: MetaSupply):
        self.d = d
        self.supply = supply
        self.pos = 0
        self.renaming: dict[int, int] = {}

    def bind(self, flat_id: int) -> int:
        if flat_id in self.renaming:
            raise UntraceableDerivation(f"metavariable {flat_id} introduced twice")
        self.renaming[flat_id] = self.supply.fresh()
        return self.renaming[flat_id]

    def m(self, t: MonoType) -> MonoType:
        if isinstance(t, Meta):
            if t.id not in self.renaming:
                raise UntraceableDerivation(f"t{t.id} used before it is introduced")
            return Meta(self.renaming[t.id])
        if isinstance(t, Arrow):
            return Arrow(self.m(t.param), self.m(t.result))
        return t

    def s(self, sc: Scheme) -> Scheme:
        if isinstance(sc, SchemeMeta):
            if sc.id not in self.renaming:
                raise UntraceableDerivation(f"s{sc.id} used before it is introduced")
            return SchemeMeta(self.renaming[sc.id])
        return Forall(sc.bound, self.m(sc.body))

    def next_entry(self, ctx: CtxRef, result: int) -> tuple[RuleInstance, list[Constraint]]:
        if self.pos >= len(self.d.trace):
            raise UntraceableDerivation("rule trace ends early")
        entry = self.d.trace[self.pos]
        self.pos += 1
        if entry.ctx != ctx or entry.result != result:
            raise UntraceableDerivation(f"trace entry {self.pos - 1} ({entry.rule}) does not continue its parent")
        shape = _SHAPES.get((self.d.system, entry.rule))
        if shape is None or entry.premises != _ARITY[entry.rule]:
            raise UntraceableDerivation(f"rule {entry.rule} is not part of {self.d.system}")
        try:
            cs = [self.d.constraints[i] for i in entry.emitted]
        except IndexError:
            raise UntraceableDerivation(f"trace entry {self.pos - 1} names a missing constraint") from None
        if tuple(type(c) for c in cs) != shape:
            raise UntraceableDerivation(f"trace entry {self.pos - 1} ({entry.rule}) emitted unexpected constraints")
        return entry, cs

    def judgment(self, ctx: CtxRef, result: int) -> list[TreeNode]:
        entry, cs = self.next_entry(ctx, result)
        if entry.rule == "Var":
            found = cs[0]
            assert isinstance(found, InCtx)
            if self.d.system == "stlc":
                return [Constr(Ask(found.name, self.s(found.scheme)))]
            sigma = self.bind(entry.role("sigma"))
            inst = cs[1]
            assert isinstance(inst, Inst)
            return [Quantify(sigma, "poly"), Constr(Ask(found.name, self.s(found.scheme))),
                    Constr(Inst(self.s(inst.scheme), self.m(inst.target)))]
        if entry.rule == "Lam":
            ext, eq = cs
            assert isinstance(ext, ExtendCtx)
            nodes: list[TreeNode] = [Quantify(self.bind(entry.role("tp"))), Quantify(self.bind(entry.role("tr")))]
            nodes += [Constr(self.eq(eq)), Constr(Tell(ext.name, self.s(ext.scheme)))]
            return nodes + self.judgment(ext.out, entry.role("tr"))
        if entry.rule == "ALam":
            dup, ext, eq = cs
            assert isinstance(dup, DupTy) and isinstance(ext, ExtendCtx)
            nodes = [Quantify(self.bind(entry.role(r))) for r in ("tap", "taf", "tr")]
            nodes += [Constr(DupTy(self.m(dup.src), self.m(dup.out1), self.m(dup.out2))),
                      Constr(Tell(ext.name, self.s(ext.scheme))), Constr(self.eq(eq))]
            return nodes + self.judgment(ext.out, entry.role("tr"))
        if entry.rule == "App":
            dup, eq = cs
            assert isinstance(dup, DupCtx)
            if len(dup.outs) != 2:
                raise UntraceableDerivation("App must duplicate its context twice")
            tf, tp = entry.role("tf"), entry.role("tp")
            nodes = [Quantify(self.bind(tf)), Quantify(self.bind(tp)), Constr(self.eq(eq))]
            fun = self.judgment(dup.outs[0], tf)
            arg = self.judgment(dup.outs[1], tp)
            return nodes + [Branch((Telescope(tuple(fun)), Telescope(tuple(arg))))]
        if entry.rule == "Let":
            dup, gen, ext = cs
            assert isinstance(dup, DupCtx) and isinstance(gen, GenInCtx) and isinstance(ext, ExtendCtx)
            if len(dup.outs) != 3 or gen.ctx != dup.outs[1] or ext.base != dup.outs[2]:
                raise UntraceableDerivation("Let contexts do not follow the rule")
            sigma = self.bind(entry.role("sigma"))
            tb = entry.role("tb")
            bound: list[TreeNode] = [Constr(GenOpen()), Quantify(self.bind(tb)),
                                     Constr(GenClose(self.s(gen.scheme), self.m(gen.mono)))]
            bound += self.judgment(dup.outs[0], tb)
            body: list[TreeNode] = [Constr(Tell(ext.name, self.s(ext.scheme)))]
            body += self.judgment(ext.out, result)
            return [Quantify(sigma, "poly"), Branch((Telescope(tuple(bound)), Telescope(tuple(body))))]
        raise UntraceableDerivation(f"unknown rule {entry.rule}")

    def eq(self, c: Constraint) -> EqTy:
        assert isinstance(c, EqTy)
        return EqTy(self.m(c.left), self.m(c.right))


def flat_to_tree(d: FlatDerivation, ctx: Context = Context(), start: Start = Start.MONO,
                 supply: Optional[MetaSupply] = None) -> Telescope:
    return flat_to_tree_with_renaming(d, ctx, start, supply)[0]


def flat_to_tree_with_renaming(d: FlatDerivation, ctx: Context = Context(), start: Start = Start.MONO,
                               supply: Optional[MetaSupply] = None) -> tuple[Telescope, dict[int, int]]:
    """Also returns the map from flat metavariable ids to tree ids."""
    if not d.trace or d.root_ctx is None or d.result is None:
        raise UntraceableDerivation("derivation carries no rule trace")
    rw = _Rewriter(d, supply or MetaSupply())
    if start is Start.POLY:
        if d.system != "hm":
            raise ValueError("polymorphic start requires the hm system")
        sigma = rw.supply.fresh()
        tau = rw.bind(d.result)
        head: list[TreeNode] = [Quantify(sigma, "poly"), Constr(GenOpen()), Quantify(tau),
                                Constr(GenClose(SchemeMeta(sigma), Meta(tau)))]
    else:
        head = [Quantify(rw.bind(d.result))]
    nodes = head + rw.judgment(d.root_ctx, d.result)
    if rw.pos != len(d.trace):
        raise UntraceableDerivation("rule trace has entries left over")
    return Telescope(tuple(nodes), prefix=ctx), rw.renaming


# -- contexts and rendering ---------------------------------------------------------

def contexts_from_trace(d: FlatDerivation, root: Context = Context()) -> dict[int, Context]:
    """Assign every context reference by following extensions and duplications from the root."""
    assert d.root_ctx is not None
    ctxs: dict[int, Context] = {d.root_ctx.id: root}
    pending = [c for c in d.constraints if isinstance(c, (ExtendCtx, DupCtx))]
    while pending:
        rest = []
        for c in pending:
            if isinstance(c, DupCtx) and c.src.id in ctxs:
                for out in c.outs:
                    ctxs[out.id] = ctxs[c.src.id]
            elif isinstance(c, ExtendCtx) and c.base.id in ctxs:
                ctxs[c.out.id] = ctxs[c.base.id].extend(c.name, c.scheme)
            else:
                rest.append(c)
        if len(rest) == len(pending):
            raise UntraceableDerivation("context references are not connected to the root")
        pending = rest
    return ctxs


def render_flat(d: FlatDerivation) -> str:
    owner: dict[int, str] = {}
    for n, entry in enumerate(d.trace):
        for i in entry.emitted:
            owner[i] = f"{entry.rule}#{n}"
    lines = [f"root {d.root_ctx} ; result t{d.result}"]
    width = max((len(v) for v in owner.values()), default=0)
    for i, c in enumerate(d.constraints):
        lines.append(f"{owner.get(i, '?'):<{width}}  {render(c)}")
    return "\n".join(lines) + "\n"


def rule_counts(d: FlatDerivation) -> Counter[str]:
    return Counter(entry.rule for entry in d.trace)


def constraint_kinds(d: FlatDerivation, entry: RuleInstance) -> list[str]:
    return [type(d.constraints[i]).__name__ for i in entry.emitted]

