"""Reference Algorithm W and a seeded random term generator.

The inference here is the textbook substitution-passing algorithm. It
shares nothing with the solver beyond the term and type data classes, which
is what makes comparing the two meaningful.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .syntax import ALam, App, Lam, Let, Term, Var, print_term, term_depth, term_size
from .types import Arrow, Base, Context, Forall, MonoType, Rigid, canonical_scheme


class OracleError(Exception):
    """kind is one of "mismatch", "occurs-check", "unbound-variable"."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


@dataclass(frozen=True)
class TV:
    n: int


WType = Union[TV, Rigid, Base, "WArrow"]


@dataclass(frozen=True)
class WArrow:
    param: WType
    result: WType


@dataclass(frozen=True)
class WScheme:
    vars: frozenset[int]
    body: WType


Subst = dict[int, WType]


def apply(s: Subst, t: WType) -> WType:
    if isinstance(t, TV):
        if t.n in s:
            return apply(s, s[t.n])
        return t
    if isinstance(t, WArrow):
        return WArrow(apply(s, t.param), apply(s, t.result))
    return t


def apply_scheme(s: Subst, sc: WScheme) -> WScheme:
    return WScheme(sc.vars, apply({k: v for k, v in s.items() if k not in sc.vars}, sc.body))


def compose(s2: Subst, s1: Subst) -> Subst:
    """s2 after s1."""
    out = {k: apply(s2, v) for k, v in s1.items()}
    for k, v in s2.items():
        out.setdefault(k, v)
    return out


def ftv(t: WType) -> set[int]:
    if isinstance(t, TV):
        return {t.n}
    if isinstance(t, WArrow):
        return ftv(t.param) | ftv(t.result)
    return set()


def ftv_scheme(sc: WScheme) -> set[int]:
    return ftv(sc.body) - sc.vars


class _W:
    def __init__(self):
        self.counter = itertools.count()

    def fresh(self) -> TV:
        return TV(next(self.counter))

    def mgu(self, a: WType, b: WType) -> Subst:
        if isinstance(a, WArrow) and isinstance(b, WArrow):
            s1 = self.mgu(a.param, b.param)
            s2 = self.mgu(apply(s1, a.result), apply(s1, b.result))
            return compose(s2, s1)
        if isinstance(a, TV):
            return self.bind(a, b)
        if isinstance(b, TV):
            return self.bind(b, a)
        if a == b:
            return {}
        raise OracleError("mismatch", f"cannot unify {a} with {b}")

    def bind(self, v: TV, t: WType) -> Subst:
        if t == v:
            return {}
        if v.n in ftv(t):
            raise OracleError("occurs-check", f"{v} occurs in {t}")
        return {v.n: t}

    def instantiate(self, sc: WScheme) -> WType:
        return apply({v: self.fresh() for v in sc.vars}, sc.body)

    @staticmethod
    def generalise(env: dict[str, WScheme], t: WType) -> WScheme:
        env_vars: set[int] = set()
        for sc in env.values():
            env_vars |= ftv_scheme(sc)
        return WScheme(frozenset(ftv(t) - env_vars), t)

    def infer(self, env: dict[str, WScheme], t: Term) -> tuple[Subst, WType]:
        if isinstance(t, Var):
            if t.name not in env:
                raise OracleError("unbound-variable", t.name)
            return {}, self.instantiate(env[t.name])
        if isinstance(t, Lam):
            beta = self.fresh()
            s1, body = self.infer({**env, t.binder: WScheme(frozenset(), beta)}, t.body)
            return s1, WArrow(apply(s1, beta), body)
        if isinstance(t, ALam):
            beta = self.fresh()
            s0 = self.mgu(beta, from_mono(t.annotation))
            env0 = {k: apply_scheme(s0, v) for k, v in env.items()}
            env0[t.binder] = WScheme(frozenset(), apply(s0, beta))
            s1, body = self.infer(env0, t.body)
            s = compose(s1, s0)
            return s, WArrow(apply(s, beta), body)
        if isinstance(t, App):
            beta = self.fresh()
            s1, fun = self.infer(env, t.fun)
            s2, arg = self.infer({k: apply_scheme(s1, v) for k, v in env.items()}, t.arg)
            s3 = self.mgu(apply(s2, fun), WArrow(arg, beta))
            return compose(s3, compose(s2, s1)), apply(s3, beta)
        if isinstance(t, Let):
            s1, bound = self.infer(env, t.bound)
            env1 = {k: apply_scheme(s1, v) for k, v in env.items()}
            sc = self.generalise(env1, bound)
            s2, body = self.infer({**env1, t.binder: sc}, t.body)
            return compose(s2, s1), body
        raise TypeError(f"not a term: {t!r}")


class _M(_W):
    """Top-down variant: the expected type is pushed into subterms before they are visited."""

    def check(self, env: dict[str, WScheme], t: Term, expected: WType) -> Subst:
        if isinstance(t, Var):
            if t.name not in env:
                raise OracleError("unbound-variable", t.name)
            return self.mgu(expected, self.instantiate(env[t.name]))
        if isinstance(t, Lam):
            b1, b2 = self.fresh(), self.fresh()
            s1 = self.mgu(expected, WArrow(b1, b2))
            env1 = {k: apply_scheme(s1, v) for k, v in env.items()}
            env1[t.binder] = WScheme(frozenset(), apply(s1, b1))
            s2 = self.check(env1, t.body, apply(s1, b2))
            return compose(s2, s1)
        if isinstance(t, ALam):
            ann = from_mono(t.annotation)
            b2 = self.fresh()
            s1 = self.mgu(expected, WArrow(ann, b2))
            env1 = {k: apply_scheme(s1, v) for k, v in env.items()}
            env1[t.binder] = WScheme(frozenset(), ann)
            s2 = self.check(env1, t.body, apply(s1, b2))
            return compose(s2, s1)
        if isinstance(t, App):
            beta = self.fresh()
            s1 = self.check(env, t.fun, WArrow(beta, expected))
            s2 = self.check({k: apply_scheme(s1, v) for k, v in env.items()}, t.arg, apply(s1, beta))
            return compose(s2, s1)
        if isinstance(t, Let):
            beta = self.fresh()
            s1 = self.check(env, t.bound, beta)
            env1 = {k: apply_scheme(s1, v) for k, v in env.items()}
            sc = self.generalise(env1, apply(s1, beta))
            s2 = self.check({**env1, t.binder: sc}, t.body, apply(s1, expected))
            return compose(s2, s1)
        raise TypeError(f"not a term: {t!r}")


def from_mono(t: MonoType) -> WType:
    if isinstance(t, Arrow):
        return WArrow(from_mono(t.param), from_mono(t.result))
    if isinstance(t, (Rigid, Base)):
        return t
    raise ValueError(f"metavariable {t} in oracle input")


def _env_from_context(w: _W, ctx: Context) -> dict[str, WScheme]:
    env: dict[str, WScheme] = {}
    for name, sc in ctx:
        if not isinstance(sc, Forall):
            raise ValueError("context schemes must be known")
        renaming = {b: w.fresh() for b in sc.bound}
        env[name] = WScheme(frozenset(v.n for v in renaming.values()),
                            _subst_bound(from_mono(sc.body), renaming))
    return env


def _subst_bound(t: WType, renaming: dict[str, TV]) -> WType:
    if isinstance(t, Rigid) and t.name in renaming:
        return renaming[t.name]
    if isinstance(t, WArrow):
        return WArrow(_subst_bound(t.param, renaming), _subst_bound(t.result, renaming))
    return t


def _to_scheme(sc: WScheme) -> Forall:
    avoid: set[str] = set()

    def rigids(t: WType) -> None:
        if isinstance(t, Rigid):
            avoid.add(t.name)
        elif isinstance(t, WArrow):
            rigids(t.param)
            rigids(t.result)

    rigids(sc.body)
    names: dict[int, str] = {}
    fresh = (f"v{i}" for i in itertools.count())

    def conv(t: WType) -> MonoType:
        if isinstance(t, TV):
            if t.n not in names:
                name = next(fresh)
                while name in avoid:
                    name = next(fresh)
                names[t.n] = name
            return Rigid(names[t.n])
        if isinstance(t, WArrow):
            return Arrow(conv(t.param), conv(t.result))
        return t

    body = conv(sc.body)
    bound = tuple(names[v] for v in sorted(sc.vars, key=lambda v: list(names).index(v)) if v in names)
    return canonical_scheme(Forall(bound, body))


def algorithm_w(ctx: Context, t: Term) -> Forall:
    """Principal scheme of `t` under `ctx`; raises OracleError."""
    w = _W()
    env = _env_from_context(w, ctx)
    s, ty = w.infer(env, t)
    ty = apply(s, ty)
    env_s = {k: apply_scheme(s, v) for k, v in env.items()}
    return _to_scheme(w.generalise(env_s, ty))


def algorithm_m(ctx: Context, t: Term) -> Forall:
    """Like `algorithm_w`, but failures surface in top-down order."""
    w = _M()
    env = _env_from_context(w, ctx)
    beta = w.fresh()
    s = w.check(env, t, beta)
    ty = apply(s, beta)
    env_s = {k: apply_scheme(s, v) for k, v in env.items()}
    return _to_scheme(w.generalise(env_s, ty))


def equiv_scheme(a: Forall, b: Forall) -> bool:
    return canonical_scheme(a) == canonical_scheme(b)


# -- fuzz corpus -----------------------------------------------------------

BASE_TYPES = (Base("Int"), Base("Bool"))


@dataclass(frozen=True)
class FuzzConfig:
    max_size: int = 30
    max_depth: int = 8
    binders: tuple[str, ...] = ("x", "y", "z", "f", "g")
    let_probability: float = 0.15
    annotation_probability: float = 0.15
    free_probability: float = 0.0


def random_type(rng: random.Random, depth: int = 2) -> MonoType:
    if depth <= 0 or rng.random() < 0.6:
        return rng.choice(BASE_TYPES)
    return Arrow(random_type(rng, depth - 1), random_type(rng, depth - 1))


def random_term(rng: random.Random, config: FuzzConfig = FuzzConfig()) -> Term:
    """A random term within the size and depth limits; closed unless free_probability > 0."""
    while True:
        t = _random_term(rng, config)
        if term_size(t) <= config.max_size and term_depth(t) <= config.max_depth:
            return t


def _random_term(rng: random.Random, config: FuzzConfig) -> Term:
    remaining = [rng.randint(1, config.max_size)]

    def var(scope: list[str]) -> Term:
        if scope and rng.random() >= config.free_probability:
            return Var(rng.choice(scope))
        if not scope and config.free_probability == 0.0:
            binder = rng.choice(config.binders)
            return Lam(binder, Var(binder))
        return Var(rng.choice(config.binders))

    def gen(depth: int, scope: list[str]) -> Term:
        remaining[0] -= 1
        if depth >= config.max_depth - 1 or remaining[0] <= 0:
            return var(scope)
        roll = rng.random()
        if roll < 0.25 and scope:
            return var(scope)
        binder = rng.choice(config.binders)
        if 0.25 <= roll < 0.25 + config.let_probability and remaining[0] >= 2:
            bound = gen(depth + 1, scope)
            return Let(binder, bound, gen(depth + 1, scope + [binder]))
        if roll < 0.6 or not scope:
            if rng.random() < config.annotation_probability:
                return ALam(binder, random_type(rng), gen(depth + 1, scope + [binder]))
            return Lam(binder, gen(depth + 1, scope + [binder]))
        if remaining[0] < 2:
            return var(scope)
        fun = gen(depth + 1, scope)
        return App(fun, gen(depth + 1, scope))

    return gen(1, [])


def corpus(seed: int, count: int, config: FuzzConfig = FuzzConfig()) -> list[Term]:
    rng = random.Random(seed)
    return [random_term(rng, config) for _ in range(count)]


def dump_corpus(seed: int, terms: Iterable[Term]) -> str:
    lines = [f"# seed={seed}"]
    lines.extend(print_term(t) for t in terms)
    return "\n".join(lines) + "\n"


def load_corpus(text: str) -> tuple[Optional[int], list[Term]]:
    from .syntax import parse_term
    seed = None
    terms = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# seed="):
                seed = int(line.split("=", 1)[1])
            continue
        terms.append(parse_term(line))
    return seed, terms
