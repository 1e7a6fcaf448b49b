"""Telescopic constraint trees.

A tree is a telescope of quantifiers, situated constraints and branches.
Metavariables are issued in generation order so renderings are stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional, Union

from .constraints import (
    Ask, Constraint, DupTy, EqTy, GenClose, GenOpen, Inst, Tell,
    free_metas, render,
)
from .syntax import ALam, App, Lam, Let, Term, Var
from .types import Arrow, Context, Forall, Meta, MetaSupply, MonoType, SchemeMeta, mono


class Start(Enum):
    MONO = "mono"
    POLY = "poly"


@dataclass(frozen=True)
class Quantify:
    meta: int
    kind: str = "mono"  # or "poly"
    solution: Union[MonoType, Forall, None] = None

    @property
    def var(self) -> Union[Meta, SchemeMeta]:
        return Meta(self.meta) if self.kind == "mono" else SchemeMeta(self.meta)


@dataclass(frozen=True)
class Constr:
    constraint: Constraint


@dataclass(frozen=True)
class Branch:
    children: tuple["Telescope", ...]


TreeNode = Union[Quantify, Constr, Branch]


@dataclass(frozen=True)
class Telescope:
    nodes: tuple[TreeNode, ...]
    prefix: Optional[Context] = None


class LiftError(ValueError):
    pass


# -- generation -----------------------------------------------------------------

class _Builder:
    def __init__(self, system: str, supply: MetaSupply):
        self.system = system
        self.supply = supply

    def fresh(self) -> int:
        return self.supply.fresh()

    def gen(self, t: Term, r: int) -> list[TreeNode]:
        if isinstance(t, Var):
            if self.system == "stlc":
                return [Constr(Ask(t.name, mono(Meta(r))))]
            sigma = self.fresh()
            return [Quantify(sigma, "poly"),
                    Constr(Ask(t.name, SchemeMeta(sigma))),
                    Constr(Inst(SchemeMeta(sigma), Meta(r)))]
        if isinstance(t, Lam):
            p, res = self.fresh(), self.fresh()
            return [Quantify(p), Quantify(res),
                    Constr(EqTy(Meta(r), Arrow(Meta(p), Meta(res)))),
                    Constr(Tell(t.binder, mono(Meta(p))))] + self.gen(t.body, res)
        if isinstance(t, ALam):
            ap, af, res = self.fresh(), self.fresh(), self.fresh()
            return [Quantify(ap), Quantify(af), Quantify(res),
                    Constr(DupTy(t.annotation, Meta(ap), Meta(af))),
                    Constr(Tell(t.binder, mono(Meta(ap)))),
                    Constr(EqTy(Meta(r), Arrow(Meta(af), Meta(res))))] + self.gen(t.body, res)
        if isinstance(t, App):
            f, p = self.fresh(), self.fresh()
            head = [Quantify(f), Quantify(p), Constr(EqTy(Arrow(Meta(p), Meta(r)), Meta(f)))]
            fun = self.gen(t.fun, f)
            arg = self.gen(t.arg, p)
            return head + [Branch((Telescope(tuple(fun)), Telescope(tuple(arg))))]
        if isinstance(t, Let):
            if self.system == "stlc":
                raise ValueError("let requires the hm system")
            sigma = self.fresh()
            tau = self.fresh()
            bound = [Constr(GenOpen()), Quantify(tau), Constr(GenClose(SchemeMeta(sigma), Meta(tau)))]
            bound += self.gen(t.bound, tau)
            body = [Constr(Tell(t.binder, SchemeMeta(sigma)))] + self.gen(t.body, r)
            return [Quantify(sigma, "poly"), Branch((Telescope(tuple(bound)), Telescope(tuple(body))))]
        raise TypeError(f"not a term: {t!r}")


def build_tree_stlc(t: Term, ctx: Context = Context(), supply: Optional[MetaSupply] = None) -> Telescope:
    b = _Builder("stlc", supply or MetaSupply())
    tau = b.fresh()
    return Telescope(tuple([Quantify(tau)] + b.gen(t, tau)), prefix=ctx)


def build_tree_hm(t: Term, ctx: Context = Context(), start: Start = Start.MONO,
                  supply: Optional[MetaSupply] = None) -> Telescope:
    b = _Builder("hm", supply or MetaSupply())
    if start is Start.MONO:
        tau = b.fresh()
        head: list[TreeNode] = [Quantify(tau)]
    else:
        sigma, tau = b.fresh(), b.fresh()
        head = [Quantify(sigma, "poly"), Constr(GenOpen()), Quantify(tau),
                Constr(GenClose(SchemeMeta(sigma), Meta(tau)))]
    return Telescope(tuple(head + b.gen(t, tau)), prefix=ctx)


def build_tree(t: Term, ctx: Context = Context(), system: str = "stlc",
               start: Start = Start.MONO, supply: Optional[MetaSupply] = None) -> Telescope:
    if system == "stlc":
        return build_tree_stlc(t, ctx, supply)
    if system == "hm":
        return build_tree_hm(t, ctx, start, supply)
    raise ValueError(f"unknown system {system!r}")


# -- queries -----------------------------------------------------------------

def iter_nodes(tree: Telescope) -> Iterator[TreeNode]:
    """Every node, pre-order; branch nodes are yielded before their children."""
    for node in tree.nodes:
        yield node
        if isinstance(node, Branch):
            for child in node.children:
                yield from iter_nodes(child)


def constraints_of(tree: Telescope) -> list[Constraint]:
    return [n.constraint for n in iter_nodes(tree) if isinstance(n, Constr)]


def quantifiers_of(tree: Telescope) -> list[Quantify]:
    return [n for n in iter_nodes(tree) if isinstance(n, Quantify)]


def has_gen_markers(tree: Telescope) -> bool:
    return any(isinstance(n, Constr) and isinstance(n.constraint, (GenOpen, GenClose))
               for n in iter_nodes(tree))


def scope_violations(tree: Telescope) -> list[tuple[int, Constraint]]:
    """(meta, constraint) pairs where the constraint mentions a meta not yet quantified."""
    problems: list[tuple[int, Constraint]] = []

    def scan(tel: Telescope, scope: frozenset[int]) -> None:
        for node in tel.nodes:
            if isinstance(node, Quantify):
                scope = scope | {node.meta}
            elif isinstance(node, Constr):
                problems.extend((m, node.constraint) for m in sorted(free_metas(node.constraint) - scope))
            else:
                for child in node.children:
                    scan(child, scope)

    scan(tree, frozenset())
    return problems


def root_result(tree: Telescope) -> Quantify:
    for node in tree.nodes:
        if isinstance(node, Quantify):
            return node
    raise ValueError("tree has no root result quantifier")


def lift_quantifiers(tree: Telescope) -> Telescope:
    """Move every quantifier to the front of the root telescope, keeping relative order."""
    if has_gen_markers(tree):
        raise LiftError("lifting unsound for generalisation regions")
    quantifiers = quantifiers_of(tree)

    def strip(tel: Telescope) -> Telescope:
        kept: list[TreeNode] = []
        for node in tel.nodes:
            if isinstance(node, Quantify):
                continue
            if isinstance(node, Branch):
                node = Branch(tuple(strip(child) for child in node.children))
            kept.append(node)
        return replace(tel, nodes=tuple(kept))

    rest = strip(tree)
    return replace(rest, nodes=tuple(quantifiers) + rest.nodes)


def append_root(tree: Telescope, *nodes: TreeNode) -> Telescope:
    return replace(tree, nodes=tree.nodes + nodes)


# -- serialisation ---------------------------------------------------------------

def render_quantifier(q: Quantify) -> str:
    text = f"exists {q.var}"
    if q.solution is not None:
        text += f" := {q.solution}"
    return text


def render_node(node: TreeNode) -> str:
    if isinstance(node, Quantify):
        return render_quantifier(node)
    if isinstance(node, Constr):
        return render(node.constraint)
    return f"branch/{len(node.children)}"


def render_text(tree: Telescope) -> str:
    """Indented text, one node per line; `|` lines open branch children."""
    lines: list[str] = []
    if tree.prefix is not None:
        lines.append("{" + str(tree.prefix) + "}")

    def emit(tel: Telescope, indent: str) -> None:
        for node in tel.nodes:
            if isinstance(node, Branch):
                for child in node.children:
                    lines.append(f"{indent}|")
                    emit(child, indent + "  ")
            else:
                lines.append(indent + render_node(node))

    emit(tree, "")
    return "\n".join(lines) + "\n"


def _constraint_json(c: Constraint) -> dict:
    return {"kind": type(c).__name__, "text": render(c)}


def to_json_obj(tree: Telescope) -> dict:
    def node_obj(node: TreeNode) -> dict:
        if isinstance(node, Quantify):
            return {"kind": "exists", "meta": str(node.var), "sort": node.kind,
                    "solution": None if node.solution is None else str(node.solution)}
        if isinstance(node, Constr):
            return {"kind": "constraint", "constraint": _constraint_json(node.constraint)}
        return {"kind": "branch", "children": [tel_obj(child) for child in node.children]}

    def tel_obj(tel: Telescope) -> dict:
        obj: dict = {}
        if tel.prefix is not None:
            obj["prefix"] = [{"name": name, "scheme": str(s)} for name, s in tel.prefix]
        obj["nodes"] = [node_obj(n) for n in tel.nodes]
        return obj

    return tel_obj(tree)


def render_json(tree: Telescope) -> str:
    return json.dumps(to_json_obj(tree), indent=2) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def render_dot(tree: Telescope) -> str:
    lines = ["digraph tree {", "  node [shape=box, fontname=monospace];"]
    counter = 0

    def new_node(label: str, shape: str = "box") -> str:
        nonlocal counter
        name = f"n{counter}"
        counter += 1
        lines.append(f'  {name} [label="{_dot_escape(label)}", shape={shape}];')
        return name

    def emit(tel: Telescope, parent: Optional[str]) -> None:
        prev = parent
        for node in tel.nodes:
            if isinstance(node, Branch):
                fork = new_node("|", shape="point")
                if prev is not None:
                    lines.append(f"  {prev} -> {fork};")
                for child in node.children:
                    emit(child, fork)
                prev = fork
                continue
            cur = new_node(render_node(node))
            if prev is not None:
                lines.append(f"  {prev} -> {cur};")
            prev = cur

    root = new_node("{" + str(tree.prefix or "") + "}", shape="ellipse")
    emit(tree, root)
    lines.append("}")
    return "\n".join(lines) + "\n"
