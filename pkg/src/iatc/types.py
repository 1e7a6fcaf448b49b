"""Monotypes, type schemes, contexts and the metavariable supply."""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Optional, Union


@dataclass(frozen=True)
class Meta:
    """Unification metavariable, rendered t<id>."""
    id: int

    def __str__(self) -> str:
        return f"t{self.id}"


@dataclass(frozen=True)
class Rigid:
    """Rigid (skolem) type variable; lowercase name."""
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Base:
    """Base type such as Int or Bool; uppercase name."""
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Arrow:
    param: "MonoType"
    result: "MonoType"

    def __str__(self) -> str:
        left = f"({self.param})" if isinstance(self.param, Arrow) else str(self.param)
        return f"{left} -> {self.result}"


MonoType = Union[Meta, Rigid, Base, Arrow]


@dataclass(frozen=True)
class Forall:
    """n-ary type scheme; the n=0 scheme embeds a monotype."""
    bound: tuple[str, ...]
    body: MonoType

    def __post_init__(self) -> None:
        if len(set(self.bound)) != len(self.bound):
            raise ValueError(f"duplicate bound variable in forall {' '.join(self.bound)}")

    def __str__(self) -> str:
        if not self.bound:
            return str(self.body)
        return f"forall {' '.join(self.bound)}. {self.body}"


@dataclass(frozen=True)
class SchemeMeta:
    """Scheme metavariable (an unknown polytype), rendered s<id>."""
    id: int

    def __str__(self) -> str:
        return f"s{self.id}"


PolyType = Forall
Scheme = Union[Forall, SchemeMeta]


def mono(t: MonoType) -> Forall:
    return Forall((), t)


@dataclass(frozen=True)
class Context:
    """Ordered bindings, leftmost outermost; lookup finds the innermost."""
    entries: tuple[tuple[str, Scheme], ...] = ()

    def lookup(self, name: str) -> Optional[Scheme]:
        for entry_name, scheme in reversed(self.entries):
            if entry_name == name:
                return scheme
        return None

    def extend(self, name: str, scheme: Scheme) -> Context:
        return Context(self.entries + ((name, scheme),))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, Scheme]]:
        return iter(self.entries)

    def __str__(self) -> str:
        return ", ".join(f"{name} : {scheme}" for name, scheme in self.entries)


@dataclass
class MetaSupply:
    """Monotone counter issuing metavariable ids; one per session."""
    next_id: int = 0

    def fresh(self) -> int:
        issued = self.next_id
        self.next_id += 1
        return issued

    def fresh_meta(self) -> Meta:
        return Meta(self.fresh())


def fresh_meta(supply: MetaSupply) -> Meta:
    return supply.fresh_meta()


# -- traversals ---------------------------------------------------------------

def walk_mono(t: MonoType) -> Iterator[MonoType]:
    """Pre-order, left to right."""
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Arrow):
            stack.append(node.result)
            stack.append(node.param)


def metas_in_order(t: MonoType) -> list[int]:
    seen: dict[int, None] = {}
    for node in walk_mono(t):
        if isinstance(node, Meta):
            seen.setdefault(node.id, None)
    return list(seen)


def rigids_in_order(t: MonoType) -> list[str]:
    seen: dict[str, None] = {}
    for node in walk_mono(t):
        if isinstance(node, Rigid):
            seen.setdefault(node.name, None)
    return list(seen)


def free_rigids(s: Union[MonoType, Forall]) -> set[str]:
    if isinstance(s, Forall):
        return set(rigids_in_order(s.body)) - set(s.bound)
    return set(rigids_in_order(s))


def map_leaves(t: MonoType, fn: Callable[[MonoType], MonoType]) -> MonoType:
    if isinstance(t, Arrow):
        return Arrow(map_leaves(t.param, fn), map_leaves(t.result, fn))
    return fn(t)


def subst_rigids(t: MonoType, mapping: Mapping[str, MonoType]) -> MonoType:
    return map_leaves(t, lambda leaf: mapping.get(leaf.name, leaf) if isinstance(leaf, Rigid) else leaf)


def subst_metas(t: MonoType, mapping: Mapping[int, MonoType]) -> MonoType:
    return map_leaves(t, lambda leaf: mapping.get(leaf.id, leaf) if isinstance(leaf, Meta) else leaf)


def type_size(t: MonoType) -> int:
    return sum(1 for _ in walk_mono(t))


# -- canonical naming ----------------------------------------------------------

def variable_names(avoid: Iterable[str] = ()) -> Iterator[str]:
    """a, b, ..., z, a1, b1, ... skipping anything in `avoid`."""
    avoid = set(avoid)
    for suffix in itertools.chain([""], (str(n) for n in itertools.count(1))):
        for letter in string.ascii_lowercase:
            name = letter + suffix
            if name not in avoid:
                yield name


def canonical_scheme(s: Forall) -> Forall:
    """Rename bound variables to a, b, ... in first-occurrence order; drop vacuous ones."""
    used = [name for name in rigids_in_order(s.body) if name in s.bound]
    names = variable_names(free_rigids(s))
    renaming = {old: next(names) for old in used}
    body = subst_rigids(s.body, {old: Rigid(new) for old, new in renaming.items()})
    return Forall(tuple(renaming[old] for old in used), body)


def residualize(t: MonoType, avoid: Iterable[str] = ()) -> tuple[MonoType, list[int]]:
    """Replace metavariables by fresh rigid names in first-occurrence order."""
    order = metas_in_order(t)
    names = variable_names(set(avoid) | set(rigids_in_order(t)))
    renaming: dict[int, MonoType] = {m: Rigid(next(names)) for m in order}
    return subst_metas(t, renaming), order


def generalize_all(t: MonoType, avoid: Iterable[str] = ()) -> Forall:
    """Quantify every metavariable of `t`, naming them canonically."""
    order = metas_in_order(t)
    names = variable_names(set(avoid) | set(rigids_in_order(t)))
    renaming = {m: next(names) for m in order}
    body = subst_metas(t, {m: Rigid(name) for m, name in renaming.items()})
    return Forall(tuple(renaming[m] for m in order), body)
