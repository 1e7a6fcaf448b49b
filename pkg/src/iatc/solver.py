"""Single-pass solver for telescopic constraint trees.

Metavariables live in an ordered store. A solution may only mention
metavariables declared earlier; when unification would break that, the
offending later metavariables are hoisted in front of the one being
solved. Generalisation regions are store marks: what is still unsolved
after a mark, and not reachable from outside it, gets quantified.

A ``]gen`` node sits in front of the term it generalises, so the actual
generalisation happens when the telescope segment holding the region ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Union

from .constraints import (
    Ask, Constraint, DupTy, EqTy, GenClose, GenOpen, Inst, Tell, render,
)
from .syntax import Term
from .treegen import (
    Branch, Constr, Quantify, Start, Telescope, TreeNode,
    append_root, build_tree, iter_nodes, quantifiers_of, render_node, root_result,
)
from .types import (
    Arrow, Base, Context, Forall, Meta, MetaSupply, MonoType, Rigid, Scheme, SchemeMeta,
    canonical_scheme, metas_in_order, mono, residualize, rigids_in_order, subst_metas,
    subst_rigids, variable_names,
)


class FailureKind(Enum):
    MISMATCH = "mismatch"
    OCCURS_CHECK = "occurs-check"
    UNBOUND_VARIABLE = "unbound-variable"


class Verdict(Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    UNKNOWN = "UNKNOWN"


class UnifyError(Exception):
    def __init__(self, kind: FailureKind, left: MonoType, right: MonoType):
        self.kind = kind
        self.left = left
        self.right = right
        super().__init__(f"{kind.value}: {left} ~ {right}")


class UnsolvedScheme(Exception):
    """A scheme was needed before anything determined it."""


# -- the store ---------------------------------------------------------------

@dataclass
class Entry:
    meta: int
    kind: str = "mono"
    solution: Union[MonoType, Forall, None] = None
    generalised: bool = False


class Mark:
    """Start of a generalisation region."""

    def __repr__(self) -> str:
        return "Mark()"


class MetaStore:
    def __init__(self, supply: Optional[MetaSupply] = None):
        self.supply = supply or MetaSupply()
        self.order: list[Union[Entry, Mark]] = []
        self.entries: dict[int, Entry] = {}
        self.log: list[str] = []
        # names already used for quantified variables, or present as rigids anywhere
        self.reserved: set[str] = set()

    def declare(self, meta: int, kind: str = "mono", front: bool = False) -> Entry:
        if meta in self.entries:
            raise ValueError(f"metavariable {meta} declared twice")
        entry = Entry(meta, kind)
        self.entries[meta] = entry
        if front:
            self.order.insert(0, entry)
        else:
            self.order.append(entry)
        self.supply.next_id = max(self.supply.next_id, meta + 1)
        return entry

    def fresh(self) -> Meta:
        m = self.supply.fresh()
        self.declare(m)
        self.log.append(f"exists t{m}")
        return Meta(m)

    def position(self, meta: int) -> int:
        return self.order.index(self.entries[meta])

    def is_solved(self, meta: int) -> bool:
        return self.entries[meta].solution is not None

    def walk(self, t: MonoType) -> MonoType:
        while isinstance(t, Meta):
            entry = self.entries.get(t.id)
            if entry is None:
                raise KeyError(f"metavariable {t} is not declared")
            if not isinstance(entry.solution, (Meta, Rigid, Base, Arrow)):
                return t
            t = entry.solution
        return t

    def zonk(self, t: MonoType) -> MonoType:
        t = self.walk(t)
        if isinstance(t, Arrow):
            return Arrow(self.zonk(t.param), self.zonk(t.result))
        return t

    def zonk_scheme(self, s: Scheme) -> Scheme:
        if isinstance(s, SchemeMeta):
            entry = self.entries[s.id]
            if entry.solution is None:
                return s
            s = entry.solution  # type: ignore[assignment]
        return Forall(s.bound, self.zonk(s.body))

    def assign(self, meta: int, value: Union[MonoType, Forall]) -> None:
        entry = self.entries[meta]
        if entry.solution is not None:
            raise ValueError(f"metavariable {meta} is already solved")
        body = value.body if isinstance(value, Forall) else value
        pos = self.position(meta)
        later = [m for m in metas_in_order(body) if self.position(m) > pos]
        if later:
            moved = sorted((self.entries[m] for m in later), key=lambda e: self.order.index(e))
            for e in moved:
                self.order.remove(e)
            pos = self.order.index(entry)
            self.order[pos:pos] = moved
            self.log.append("hoist " + " ".join(f"t{e.meta}" for e in moved) + f" before {_meta_name(entry)}")
        entry.solution = value
        self.log.append(f"{_meta_name(entry)} := {value}")

    def open_region(self) -> Mark:
        mark = Mark()
        self.order.append(mark)
        self.log.append("gen[")
        return mark

    def generalize(self, mark: Mark, body: MonoType, outside: tuple[Scheme, ...] = ()) -> Forall:
        """Quantify the unsolved metavariables of `body` declared after `mark` that nothing outside reaches."""
        body = self.zonk(body)
        start = self.order.index(mark)
        inside = {e.meta for e in self.order[start + 1:]
                  if isinstance(e, Entry) and e.kind == "mono" and e.solution is None}
        escaping: set[int] = set()
        for e in self.order[:start]:
            if isinstance(e, Entry) and e.solution is not None:
                sol = e.solution
                escaping.update(metas_in_order(self.zonk(sol.body if isinstance(sol, Forall) else sol)))
        for s in outside:
            z = self.zonk_scheme(s)
            if isinstance(z, Forall):
                escaping.update(metas_in_order(z.body))
        chosen = [m for m in metas_in_order(body) if m in inside and m not in escaping]
        names = variable_names(self.reserved | set(rigids_in_order(body)))
        renaming = {m: next(names) for m in chosen}
        self.reserved.update(renaming.values())
        for m, name in renaming.items():
            entry = self.entries[m]
            entry.solution = Rigid(name)
            entry.generalised = True
        self.order.remove(mark)
        scheme = Forall(tuple(renaming.values()),
                        subst_metas(body, {m: Rigid(n) for m, n in renaming.items()}))
        self.log.append(f"]gen {scheme}")
        return scheme

    def discipline_violations(self) -> list[str]:
        """Solutions that mention a metavariable declared at or after their own entry."""
        problems = []
        seen: set[int] = set()
        for e in self.order:
            if not isinstance(e, Entry):
                continue
            if e.solution is not None and not e.generalised:
                body = e.solution.body if isinstance(e.solution, Forall) else e.solution
                for m in metas_in_order(body):
                    if m not in seen:
                        problems.append(f"{_meta_name(e)} := {e.solution} mentions t{m}")
            seen.add(e.meta)
        return problems


def _meta_name(entry: Entry) -> str:
    return f"t{entry.meta}" if entry.kind == "mono" else f"s{entry.meta}"


def unify(store: MetaStore, a: MonoType, b: MonoType) -> MetaStore:
    a, b = store.walk(a), store.walk(b)
    if a == b:
        return store
    if isinstance(a, Meta) and isinstance(b, Meta):
        # the later-declared metavariable is defined as the earlier one
        if store.position(a.id) < store.position(b.id):
            a, b = b, a
        store.assign(a.id, b)
        return store
    if isinstance(b, Meta):
        a, b = b, a
    if isinstance(a, Meta):
        full = store.zonk(b)
        if a.id in metas_in_order(full):
            raise UnifyError(FailureKind.OCCURS_CHECK, a, full)
        store.assign(a.id, full)
        return store
    if isinstance(a, Arrow) and isinstance(b, Arrow):
        unify(store, a.param, b.param)
        unify(store, a.result, b.result)
        return store
    raise UnifyError(FailureKind.MISMATCH, a, b)


def instantiate(store: MetaStore, s: Scheme) -> MonoType:
    if isinstance(s, SchemeMeta):
        s = store.zonk_scheme(s)  # type: ignore[assignment]
        if isinstance(s, SchemeMeta):
            raise UnsolvedScheme(f"instantiation of unsolved scheme {s}")
    fresh = {name: store.fresh() for name in s.bound}
    return subst_rigids(s.body, fresh)


def generalize(store: MetaStore, region_start: Mark, body: MonoType,
               outside: tuple[Scheme, ...] = ()) -> Forall:
    return store.generalize(region_start, body, outside)


# -- outcomes --------------------------------------------------------------------

@dataclass(frozen=True)
class Solved:
    result: Union[MonoType, Forall]
    tree: Telescope


@dataclass(frozen=True)
class Ambiguous:
    result: Optional[MonoType]
    unsolved: tuple[int, ...]
    tree: Telescope
    reason: str = ""


@dataclass(frozen=True)
class Failed:
    kind: FailureKind
    path: tuple[int, ...]
    detail: Constraint
    node: Optional[Constraint]
    tree: Telescope

    @property
    def message(self) -> str:
        where = list(self.path)
        if self.node is None or self.node == self.detail:
            return f"{self.kind.value} {where} at {render(self.detail)}"
        return f"{self.kind.value} {where} at {render(self.node)}: {render(self.detail)}"


Outcome = Union[Solved, Ambiguous, Failed]


def classify(outcome: Outcome) -> Verdict:
    if isinstance(outcome, Solved):
        return Verdict.SAT
    if isinstance(outcome, Failed):
        return Verdict.UNSAT
    return Verdict.UNKNOWN


class _Failure(Exception):
    def __init__(self, kind: FailureKind, path: tuple[int, ...], detail: Constraint, node: Constraint):
        self.kind, self.path, self.detail, self.node = kind, path, detail, node


class _Stuck(Exception):
    def __init__(self, reason: str, path: tuple[int, ...]):
        self.reason, self.path = reason, path


@dataclass
class _Pending:
    mark: Mark
    frames_outside: int
    scheme: Optional[Scheme] = None
    mono: Optional[MonoType] = None


@dataclass
class SolveState:
    store: MetaStore
    frames: list[tuple[str, Scheme]] = field(default_factory=list)
    requirements: dict[str, Meta] = field(default_factory=dict)
    open_context: bool = False
    trace: Optional[Callable[[str], None]] = None


class _Solver:
    def __init__(self, state: SolveState):
        self.st = state
        self.store = state.store

    def emit(self, path: tuple[int, ...], node: TreeNode, action: str) -> None:
        if self.st.trace is None:
            self.store.log.clear()
            return
        deltas = "; ".join(self.store.log)
        self.store.log.clear()
        line = f"{list(path)} {render_node(node)} :: {action}"
        if deltas:
            line += f" :: {deltas}"
        self.st.trace(line)

    def segment(self, tel: Telescope, route: tuple[int, ...]) -> None:
        depth = len(self.st.frames)
        regions: list[_Pending] = []
        child_no = 0
        for i, node in enumerate(tel.nodes):
            path = route + (i,)
            if isinstance(node, Quantify):
                self.store.declare(node.meta, node.kind)
                self.emit(path, node, "declare")
            elif isinstance(node, Branch):
                self.emit(path, node, "branch")
                for child in node.children:
                    child_no += 1
                    self.segment(child, route + (child_no,))
            else:
                action = self.constraint(node.constraint, path, regions)
                self.emit(path, node, action)
        for region in reversed(regions):
            if region.scheme is None:
                raise ValueError("generalisation region opened but never closed")
            outside = tuple(s for _, s in self.st.frames[:region.frames_outside])
            scheme = self.store.generalize(region.mark, region.mono, outside)
            target = region.scheme
            if isinstance(target, SchemeMeta) and not self.store.is_solved(target.id):
                self.store.assign(target.id, scheme)
            if self.st.trace is not None:
                self.st.trace(f"{list(route)} end of segment :: generalise :: " + "; ".join(self.store.log))
            self.store.log.clear()
        del self.st.frames[depth:]

    def lookup(self, name: str) -> Optional[Scheme]:
        for entry_name, s in reversed(self.st.frames):
            if entry_name == name:
                return s
        return None

    def unify_at(self, a: MonoType, b: MonoType, path: tuple[int, ...], node: Constraint) -> None:
        detail = EqTy(self.store.zonk(a), self.store.zonk(b))
        try:
            unify(self.store, a, b)
        except UnifyError as err:
            raise _Failure(err.kind, path, detail, node) from None

    def constraint(self, c: Constraint, path: tuple[int, ...], regions: list[_Pending]) -> str:
        if isinstance(c, EqTy):
            self.unify_at(c.left, c.right, path, c)
            return "unify"
        if isinstance(c, DupTy):
            self.unify_at(c.out1, c.src, path, c)
            self.unify_at(c.out2, c.src, path, c)
            return "duplicate"
        if isinstance(c, Tell):
            self.st.frames.append((c.name, c.scheme))
            return "bind"
        if isinstance(c, Ask):
            return self.ask(c, path)
        if isinstance(c, Inst):
            try:
                instance = instantiate(self.store, c.scheme)
            except UnsolvedScheme as err:
                raise _Stuck(str(err), path) from None
            self.unify_at(instance, c.target, path, c)
            return "instantiate"
        if isinstance(c, GenOpen):
            regions.append(_Pending(self.store.open_region(), len(self.st.frames)))
            return "open region"
        if isinstance(c, GenClose):
            open_regions = [r for r in regions if r.scheme is None]
            if not open_regions:
                raise ValueError("]gen without a matching gen[ in its telescope")
            open_regions[-1].scheme = c.scheme
            open_regions[-1].mono = c.mono
            return "close region (generalise at end of segment)"
        raise ValueError(f"constraint {render(c)} cannot appear in a tree")

    def ask(self, c: Ask, path: tuple[int, ...]) -> str:
        found = self.lookup(c.name)
        action = "lookup"
        if found is None:
            if not self.st.open_context:
                raise _Failure(FailureKind.UNBOUND_VARIABLE, path, c, c)
            req = self.st.requirements.get(c.name)
            if req is None:
                req = Meta(self.store.supply.fresh())
                self.store.declare(req.id, front=True)
                self.store.log.append(f"require {c.name} : {req}")
                self.st.requirements[c.name] = req
            found = mono(req)
            action = "require"
        found_z = self.store.zonk_scheme(found)
        if isinstance(found_z, SchemeMeta):
            raise _Stuck(f"instantiation of unsolved scheme {found_z}", path)
        target = c.scheme
        if isinstance(target, SchemeMeta) and not self.store.is_solved(target.id):
            self.store.assign(target.id, found_z)
            return action
        target_z = self.store.zonk_scheme(target)
        if isinstance(target_z, Forall) and not target_z.bound:
            self.unify_at(instantiate(self.store, found_z), target_z.body, path, c)
            return action
        if canonical_scheme(found_z) != canonical_scheme(target_z):  # type: ignore[arg-type]
            raise _Failure(FailureKind.MISMATCH, path,
                           EqTy(found_z.body, target_z.body), c)  # type: ignore[union-attr]
        return action


# -- entry points ---------------------------------------------------------------

def _annotate(tree: Telescope, store: MetaStore) -> Telescope:
    def tel(t: Telescope) -> Telescope:
        nodes = []
        for node in t.nodes:
            if isinstance(node, Quantify):
                entry = store.entries.get(node.meta)
                if entry is not None and entry.solution is not None:
                    sol = store.zonk_scheme(SchemeMeta(node.meta)) if node.kind == "poly" \
                        else store.zonk(Meta(node.meta))
                    node = replace(node, solution=sol)
            elif isinstance(node, Branch):
                node = Branch(tuple(tel(child) for child in node.children))
            nodes.append(node)
        return replace(t, nodes=tuple(nodes))

    return tel(tree)


def _tree_rigids(tree: Telescope) -> set[str]:
    names: set[str] = set()
    schemes = [s for _, s in tree.prefix] if tree.prefix is not None else []
    for node in iter_nodes(tree):
        if isinstance(node, Constr):
            c = node.constraint
            for value in vars(c).values():
                if isinstance(value, (Forall, Arrow, Rigid, Base, Meta)):
                    schemes.append(value)
    for s in schemes:
        if isinstance(s, Forall):
            names.update(s.bound)
            names.update(rigids_in_order(s.body))
        elif not isinstance(s, SchemeMeta):
            names.update(rigids_in_order(s))
    return names


def _first_free_id(tree: Telescope) -> int:
    ids = [q.meta for q in quantifiers_of(tree)]
    return max(ids) + 1 if ids else 0


def solve_tree(tree: Telescope, *, open_context: bool = False,
               trace: Optional[Callable[[str], None]] = None,
               state: Optional[SolveState] = None) -> Outcome:
    store = MetaStore(MetaSupply(_first_free_id(tree)))
    st = state if state is not None else SolveState(store)
    st.store = store
    st.open_context = open_context
    st.trace = trace
    store.reserved |= _tree_rigids(tree)
    if tree.prefix is not None:
        st.frames.extend(tree.prefix)
    solver = _Solver(st)
    try:
        solver.segment(tree, ())
    except _Failure as f:
        return Failed(f.kind, f.path, f.detail, f.node, _annotate(tree, store))
    except _Stuck as s:
        return Ambiguous(None, (), _annotate(tree, store), f"{s.reason} at {list(s.path)}")
    annotated = _annotate(tree, store)
    q = root_result(tree)
    if q.kind == "poly":
        scheme = store.zonk_scheme(SchemeMeta(q.meta))
        if isinstance(scheme, SchemeMeta):
            return Ambiguous(None, (q.meta,), annotated, "root scheme never generalised")
        left = metas_in_order(scheme.body)
        if left:
            body, order = residualize(scheme.body, scheme.bound)
            return Ambiguous(body, tuple(order), annotated)
        return Solved(canonical_scheme(scheme), annotated)
    t = store.zonk(Meta(q.meta))
    order = metas_in_order(t)
    if order:
        body, order = residualize(t)
        return Ambiguous(body, tuple(order), annotated)
    return Solved(t, annotated)


def solve_with_store(tree: Telescope, open_context: bool = False) -> tuple[Outcome, SolveState]:
    """Like `solve_tree` but also hands back the final solver state."""
    st = SolveState(MetaStore())
    outcome = solve_tree(tree, open_context=open_context, state=st)
    return outcome, st


def infer(t: Term, ctx: Context = Context(), system: str = "stlc", start: Start = Start.POLY,
          trace: Optional[Callable[[str], None]] = None) -> Outcome:
    """Synthesis mode: context and term known, type produced."""
    tree = build_tree(t, ctx, system, start)
    return solve_tree(tree, trace=trace)


def check(t: Term, ctx: Context, expected: MonoType, system: str = "stlc",
          trace: Optional[Callable[[str], None]] = None) -> Outcome:
    """Checking mode: synthesis plus a final equation against `expected`."""
    tree = build_tree(t, ctx, system, Start.MONO)
    tree = append_root(tree, Constr(EqTy(Meta(root_result(tree).meta), expected)))
    return solve_tree(tree, trace=trace)


@dataclass(frozen=True)
class FreeVars:
    outcome: Outcome
    requirements: tuple[tuple[str, MonoType], ...]
    result: Optional[MonoType]


def rename_jointly(types: list[MonoType]) -> list[MonoType]:
    """Replace metavariables by a, b, ... in first-occurrence order across all of `types`."""
    order: dict[int, None] = {}
    avoid: set[str] = set()
    for t in types:
        avoid.update(rigids_in_order(t))
        for m in metas_in_order(t):
            order.setdefault(m, None)
    names = variable_names(avoid)
    renaming: dict[int, MonoType] = {m: Rigid(next(names)) for m in order}
    return [subst_metas(t, renaming) for t in types]


def free_vars(t: Term, system: str = "stlc", ctx: Context = Context()) -> FreeVars:
    """Free-variable analysis: unbound names become requirements that all their uses share."""
    tree = build_tree(t, ctx, system, Start.MONO)
    outcome, st = solve_with_store(tree, open_context=True)
    if isinstance(outcome, Failed):
        return FreeVars(outcome, (), None)
    names = sorted(st.requirements)
    types = [st.store.zonk(st.requirements[n]) for n in names]
    types.append(st.store.zonk(Meta(root_result(tree).meta)))
    renamed = rename_jointly(types)
    return FreeVars(outcome, tuple(zip(names, renamed[:-1])), renamed[-1])

