"""Polarity and mode analysis over typing rule schemas.

A variable's two occurrences in a rule get opposite polarities: `+` where
its value is produced, `-` where it is consumed. The conclusion takes its
polarities from the judgment mode, premise judgments take the flipped mode,
and each constraint must match a pattern from a ConstraintModeTable.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

from .types import Arrow, MonoType, Rigid


class Polarity(Enum):
    PLUS = "+"
    MINUS = "-"

    def flip(self) -> "Polarity":
        return Polarity.MINUS if self is Polarity.PLUS else Polarity.PLUS

    def __str__(self) -> str:
        return self.value


PLUS, MINUS = Polarity.PLUS, Polarity.MINUS


@dataclass(frozen=True)
class JudgmentMode:
    ctx: Polarity
    term: Polarity
    ty: Polarity

    @classmethod
    def parse(cls, text: str) -> "JudgmentMode":
        marks = text.replace(",", " ").split()
        if len(marks) != 3 or any(m not in ("+", "-") for m in marks):
            raise ValueError(f"mode must be three of + or -, got {text!r}")
        return cls(*(Polarity(m) for m in marks))

    def flipped(self) -> "JudgmentMode":
        return JudgmentMode(self.ctx.flip(), self.term.flip(), self.ty.flip())

    def __str__(self) -> str:
        return f"G{self.ctx} |- T{self.term} : t{self.ty}"


# -- rule schemas -----------------------------------------------------------------

# A slot is a variable name, a type template over Rigid names, or a group of names.
Slot = Union[str, MonoType, tuple[str, ...]]


@dataclass(frozen=True)
class ConstraintTemplate:
    kind: str
    args: tuple[tuple[str, Slot], ...]

    def slot(self, role: str) -> Slot:
        return dict(self.args)[role]


@dataclass(frozen=True)
class JudgmentTemplate:
    ctx: str
    term: tuple[str, ...]
    term_format: str
    ty: str


Premise = Union[ConstraintTemplate, JudgmentTemplate]


@dataclass(frozen=True)
class RuleSchema:
    name: str
    conclusion: JudgmentTemplate
    premises: tuple[Premise, ...]

    def variables(self) -> Counter[str]:
        counts: Counter[str] = Counter()
        for site in (self.conclusion,) + self.premises:
            counts.update(var for _, var in site_leaves(site))
        return counts

    def linearity_violations(self) -> list[str]:
        return [f"{v} occurs {n} times" for v, n in self.variables().items() if n != 2]


def _slot_leaves(slot: Slot) -> list[str]:
    if isinstance(slot, str):
        return [slot]
    if isinstance(slot, tuple):
        return list(slot)
    if isinstance(slot, Rigid):
        return [slot.name]
    if isinstance(slot, Arrow):
        return _slot_leaves(slot.param) + _slot_leaves(slot.result)
    raise TypeError(f"not a slot: {slot!r}")


# An occurrence is (role, leaf index); roles of judgments are "ctx", "term", "ty".
Occ = tuple[str, int]


def site_leaves(site: Premise) -> list[tuple[Occ, str]]:
    if isinstance(site, JudgmentTemplate):
        out: list[tuple[Occ, str]] = [(("ctx", 0), site.ctx)]
        out += [(("term", i), v) for i, v in enumerate(site.term)]
        out.append((("ty", 0), site.ty))
        return out
    return [((role, i), v) for role, slot in site.args for i, v in enumerate(_slot_leaves(slot))]


def C(kind: str, **args: Slot) -> ConstraintTemplate:
    return ConstraintTemplate(kind, tuple(args.items()))


def J(ctx: str, term: tuple[str, ...], term_format: str, ty: str) -> JudgmentTemplate:
    return JudgmentTemplate(ctx, term, term_format, ty)


def _arr(a: str, b: str) -> Arrow:
    return Arrow(Rigid(a), Rigid(b))


VAR = RuleSchema("Var", J("G", ("x",), "{x}", "t"), (
    C("InCtx", name="x", ty="t", ctx="G"),
))
LAM = RuleSchema("Lam", J("G", ("x", "T"), "\\{x} . {T}", "tf"), (
    C("ExtendCtx", out="Gf", base="G", name="x", ty="tp"),
    J("Gf", ("T",), "{T}", "tr"),
    C("EqTy", left="tf", right=_arr("tp", "tr")),
))
APP = RuleSchema("App", J("G", ("Tf", "Tp"), "{Tf} {Tp}", "tr"), (
    C("DupCtx", src="G", outs=("Gf", "Gp")),
    J("Gf", ("Tf",), "{Tf}", "tf"),
    J("Gp", ("Tp",), "{Tp}", "tp"),
    C("EqTy", left=_arr("tp", "tr"), right="tf"),
))
ALAM = RuleSchema("ALam", J("G", ("x", "A", "T"), "\\{x} : {A} . {T}", "tf"), (
    C("DupTy", src="A", out1="tap", out2="taf"),
    C("ExtendCtx", out="Gf", base="G", name="x", ty="tap"),
    J("Gf", ("T",), "{T}", "tr"),
    C("EqTy", left="tf", right=_arr("taf", "tr")),
))
HM_VAR = RuleSchema("Var", J("G", ("x",), "{x}", "t"), (
    C("InCtx", name="x", ty="s", ctx="G"),
    C("Inst", scheme="s", target="t"),
))
HM_LET = RuleSchema("Let", J("G", ("x", "Tb", "T"), "let {x} = {Tb} in {T}", "t"), (
    C("DupCtx", src="G", outs=("Gb", "Gg", "Gt")),
    J("Gb", ("Tb",), "{Tb}", "tb"),
    C("GenInCtx", scheme="s", ty="tb", ctx="Gg"),
    C("ExtendCtx", out="Gx", base="Gt", name="x", ty="s"),
    J("Gx", ("T",), "{T}", "t"),
))

STLC_RULES = (VAR, LAM, APP)
ANNOTATED_RULES = (VAR, LAM, APP, ALAM)
HM_RULES = (HM_VAR, LAM, APP, ALAM, HM_LET)


# -- constraint mode table ------------------------------------------------------------

# Per-role requirement: "-" all leaves consumed, "+" all produced, "±" any mix.
@dataclass(frozen=True)
class ModePattern:
    kind: str
    roles: tuple[tuple[str, str], ...]
    label: str


def P(kind: str, label: str, **roles: str) -> ModePattern:
    return ModePattern(kind, tuple(roles.items()), label)


@dataclass(frozen=True)
class ConstraintModeTable:
    patterns: tuple[ModePattern, ...]
    description: str = ""

    def for_kind(self, kind: str) -> tuple[ModePattern, ...]:
        return tuple(p for p in self.patterns if p.kind == kind)


DEFAULT_TABLE = ConstraintModeTable((
    P("EqTy", "verify", left="-", right="-"),
    P("EqTy", "copy right", left="-", right="+"),
    P("EqTy", "copy left", left="+", right="-"),
    P("EqTy", "match right", left="-", right="±"),
    P("EqTy", "match left", left="±", right="-"),
    P("DupTy", "copy", src="-", out1="+", out2="+"),
    P("DupTy", "merge", src="+", out1="-", out2="-"),
    P("DupTy", "verify", src="-", out1="-", out2="-"),
    P("DupCtx", "copy", src="-", outs="+"),
    P("DupCtx", "merge", src="+", outs="-"),
    P("DupCtx", "verify", src="-", outs="-"),
    P("InCtx", "lookup", name="-", ctx="-", ty="+"),
    P("InCtx", "verify", name="-", ctx="-", ty="-"),
    P("InCtx", "require", name="-", ctx="+", ty="+"),
    P("InCtx", "require checked", name="-", ctx="+", ty="-"),
    P("ExtendCtx", "bind", base="-", name="-", ty="+", out="+"),
    P("ExtendCtx", "bind checked", base="-", name="-", ty="-", out="+"),
    P("ExtendCtx", "unbind", out="-", name="-", base="+", ty="+"),
    P("ExtendCtx", "unbind checked", out="-", name="-", ty="-", base="+"),
    P("ExtendCtx", "verify", out="-", base="-", name="-", ty="-"),
    P("Inst", "instantiate", scheme="-", target="+"),
    P("Inst", "verify", scheme="-", target="-"),
    P("GenInCtx", "generalise", ty="-", ctx="-", scheme="+"),
    P("GenInCtx", "verify", ty="-", ctx="-", scheme="-"),
), description="reconstructed table: deterministic dataflow, no search")


# -- analysis -----------------------------------------------------------------

Site = int  # -1 for the conclusion, otherwise a premise index
Key = tuple[Site, Occ]


@dataclass(frozen=True)
class ModedRule:
    rule: RuleSchema
    mode: JudgmentMode
    sub_mode: JudgmentMode
    polarity: tuple[tuple[Key, Polarity], ...]
    patterns: tuple[Optional[str], ...]  # chosen pattern label per premise

    def pol(self, site: Site, occ: Occ) -> Polarity:
        return dict(self.polarity)[(site, occ)]

    def render_site(self, site: Site) -> str:
        tpl = self.rule.conclusion if site == -1 else self.rule.premises[site]
        return _render_site(tpl, lambda occ: self.pol(site, occ))

    def lines(self) -> list[str]:
        premises = [self.render_site(i) for i in range(len(self.rule.premises))]
        conclusion = self.render_site(-1)
        width = max(len(line) for line in premises + [conclusion])
        return premises + ["-" * width + f" ({self.rule.name})", conclusion]

    def render(self) -> str:
        return "\n".join(self.lines()) + "\n"


@dataclass(frozen=True)
class Unmoded:
    rule: RuleSchema
    mode: JudgmentMode
    reason: str


class DataflowError(ValueError):
    pass


def _render_slot(slot: Slot, role: str, pol) -> str:
    seen = [0]  # leaves rendered so far, used for arrow polarity

    def go(s: Slot) -> str:
        if isinstance(s, str):
            i = seen[0]
            seen[0] += 1
            return f"{s}{pol((role, i))}"
        if isinstance(s, tuple):
            return " ".join(go(v) for v in s)
        if isinstance(s, Rigid):
            return go(s.name)
        assert isinstance(s, Arrow)
        start = seen[0]
        param = go(s.param)
        if isinstance(s.param, Arrow):
            param = f"({param})"
        result = go(s.result)
        # an arrow is built (+) when all its leaves are consumed, otherwise taken apart
        built = all(pol((role, i)) is MINUS for i in range(start, seen[0]))
        return f"{param} ->{PLUS if built else MINUS} {result}"

    return go(slot)


_FORMATS = {
    "EqTy": "{left} ~ {right}",
    "DupTy": "dup {src} -> {out1} {out2}",
    "DupCtx": "dup {src} -> {outs}",
    "InCtx": "{name} : {ty} in {ctx}",
    "ExtendCtx": "{out} := {base} , {name} : {ty}",
    "Inst": "{scheme} <= {target}",
    "GenInCtx": "{scheme} := gen {ty} in {ctx}",
}


def _render_site(site: Premise, pol) -> str:
    if isinstance(site, JudgmentTemplate):
        term = site.term_format.format(**{v: f"{v}{pol(('term', i))}" for i, v in enumerate(site.term)})
        return f"{site.ctx}{pol(('ctx', 0))} |- {term} : {site.ty}{pol(('ty', 0))}"
    pieces = {role: _render_slot(slot, role, pol) for role, slot in site.args}
    return _FORMATS[site.kind].format(**pieces)


def render_template(site: Premise) -> str:
    """Plain rendering without polarities."""
    if isinstance(site, JudgmentTemplate):
        term = site.term_format.format(**{v: v for v in site.term})
        return f"{site.ctx} |- {term} : {site.ty}"
    plain = {role: (" ".join(slot) if isinstance(slot, tuple) else str(slot)) for role, slot in site.args}
    return _FORMATS[site.kind].format(**plain)


def _check_form(rule: RuleSchema) -> RuleSchema:
    """Checking as synthesis plus a final verification of the expected type."""
    concl = rule.conclusion
    expected = concl.ty + "'"
    verify = C("EqTy", left=concl.ty, right=expected)
    return RuleSchema(rule.name, JudgmentTemplate(concl.ctx, concl.term, concl.term_format, expected),
                      rule.premises + (verify,))


def assign_modes(rule: RuleSchema, mode: JudgmentMode,
                 table: ConstraintModeTable = DEFAULT_TABLE) -> Union[ModedRule, Unmoded]:
    bad = rule.linearity_violations()
    if bad:
        return Unmoded(rule, mode, "not linear: " + ", ".join(bad))
    sub_mode = mode
    verify = False
    if mode.term is PLUS and mode.ty is PLUS:
        sub_mode = JudgmentMode(mode.ctx, PLUS, MINUS)
        rule = _check_form(rule)
        verify = True
    return _analyse(rule, mode, sub_mode, table, verify)


def _analyse(rule: RuleSchema, mode: JudgmentMode, sub_mode: JudgmentMode,
             table: ConstraintModeTable, verify: bool = False) -> Union[ModedRule, Unmoded]:
    sites: list[tuple[Site, Premise]] = [(-1, rule.conclusion)] + list(enumerate(rule.premises))
    var_of: dict[Key, str] = {}
    occs_of: dict[str, list[Key]] = {}
    for site, tpl in sites:
        for occ, var in site_leaves(tpl):
            var_of[(site, occ)] = var
            occs_of.setdefault(var, []).append((site, occ))

    def partner(key: Key) -> Key:
        a, b = occs_of[var_of[key]]
        return b if a == key else a

    fixed: dict[Key, Polarity] = {}
    inner = sub_mode.flipped()
    for site, tpl in sites:
        if isinstance(tpl, JudgmentTemplate):
            m = mode if site == -1 else inner
            for occ, _ in site_leaves(tpl):
                fixed[(site, occ)] = {"ctx": m.ctx, "term": m.term, "ty": m.ty}[occ[0]]
    if verify:
        # the appended verification consumes both the synthesised and the expected type
        last = len(rule.premises) - 1
        for occ, _ in site_leaves(rule.premises[last]):
            fixed[(last, occ)] = MINUS
    for key, p in list(fixed.items()):
        other = partner(key)
        if other in fixed and fixed[other] is p:
            return Unmoded(rule, mode, f"{var_of[key]} is {'produced' if p is PLUS else 'consumed'} twice")
        fixed[other] = p.flip()

    constraints = [(site, tpl) for site, tpl in sites if isinstance(tpl, ConstraintTemplate)]
    first_error: list[str] = []
    for assignment, labels in _search(constraints, table, fixed, partner):
        moded = ModedRule(rule, mode, sub_mode, tuple(sorted(assignment.items(), key=_key_order)),
                          tuple(labels.get(i) for i in range(len(rule.premises))))
        try:
            firing_order(moded)
        except DataflowError as exc:
            first_error.append(str(exc))
            continue
        return moded
    if first_error:
        return Unmoded(rule, mode, first_error[0])
    return Unmoded(rule, mode, _diagnose(constraints, table, fixed, var_of))


def _key_order(item: tuple[Key, Polarity]) -> tuple:
    (site, (role, i)), _ = item
    return (site, role, i)


def _requirement(spec: str) -> Optional[Polarity]:
    return {"-": MINUS, "+": PLUS, "±": None}[spec]


def _search(constraints, table, fixed, partner) -> Iterator[tuple[dict[Key, Polarity], dict[int, str]]]:
    def go(i: int, assign: dict[Key, Polarity], labels: dict[int, str]):
        if i == len(constraints):
            yield dict(assign), dict(labels)
            return
        site, tpl = constraints[i]
        leaves = [(site, occ) for occ, _ in site_leaves(tpl)]
        for pattern in table.for_kind(tpl.kind):
            spec = dict(pattern.roles)
            if set(spec) != {role for role, _ in tpl.args}:
                continue
            wanted = [_requirement(spec[key[1][0]]) for key in leaves]
            yield from fill(i, leaves, wanted, 0, assign, {**labels, site: pattern.label})

    def fill(i, leaves, wanted, j, assign, labels):
        if j == len(leaves):
            yield from go(i + 1, assign, labels)
            return
        key = leaves[j]
        options = [wanted[j]] if wanted[j] is not None else [PLUS, MINUS]
        for p in options:
            if key in assign:
                if assign[key] is not p:
                    continue
                yield from fill(i, leaves, wanted, j + 1, assign, labels)
                continue
            other = partner(key)
            if other in assign and assign[other] is p:
                continue
            added = [key] + ([other] if other not in assign else [])
            assign[key] = p
            assign[other] = p.flip()
            yield from fill(i, leaves, wanted, j + 1, assign, labels)
            for k in added:
                del assign[k]

    yield from go(0, dict(fixed), {})


def _diagnose(constraints, table, fixed, var_of) -> str:
    for site, tpl in constraints:
        patterns = [dict(p.roles) for p in table.for_kind(tpl.kind)]
        for occ, var in site_leaves(tpl):
            p = fixed.get((site, occ))
            if p is PLUS and not any(_requirement(spec.get(occ[0], "-")) in (PLUS, None) for spec in patterns):
                return f"{tpl.kind} cannot produce {var} without search"
        fits = False
        for spec in patterns:
            ok = True
            for occ, _ in site_leaves(tpl):
                want = _requirement(spec.get(occ[0], "-"))
                have = fixed.get((site, occ))
                if want is not None and have is not None and want is not have:
                    ok = False
            fits = fits or ok
        if not fits:
            return f"no {tpl.kind} pattern fits {render_template(tpl)}"
    return "no consistent polarity assignment"


def firing_order(moded: ModedRule) -> list[int]:
    """Premise indices in an order where every consumed variable is produced first."""
    rule = moded.rule
    polarity = dict(moded.polarity)
    available = {var for occ, var in site_leaves(rule.conclusion) if polarity.get((-1, occ)) is PLUS}
    produced_anywhere = set(available)
    needs: list[set[str]] = []
    gives: list[set[str]] = []
    for i, tpl in enumerate(rule.premises):
        n, g = set(), set()
        for occ, var in site_leaves(tpl):
            (g if polarity.get((i, occ)) is PLUS else n).add(var)
        needs.append(n)
        gives.append(g)
        produced_anywhere |= g
    for i, n in enumerate(needs):
        missing = sorted(n - produced_anywhere)
        if missing:
            raise DataflowError(f"nothing produces {', '.join(missing)} for {render_template(rule.premises[i])}")
    order: list[int] = []
    waiting = list(range(len(rule.premises)))
    while waiting:
        ready = next((i for i in waiting if needs[i] <= available), None)
        if ready is None:
            cycle = "; ".join(render_template(rule.premises[i]) for i in waiting)
            raise DataflowError(f"dataflow cycle: {cycle}")
        waiting.remove(ready)
        order.append(ready)
        available |= gives[ready]
    return order


# -- appendix modes -------------------------------------------------------------

APPENDIX_MODES: tuple[tuple[str, str], ...] = (
    ("+ + +", "Type Checking / Checking"),
    ("+ + -", "Synthesis, Inference"),
    ("- + +", "Free Variable Analysis, with checked types"),
    ("- + -", "Free Variable Analysis, with synthesised types"),
    ("+ - +", "Proof Search, Program Synthesis"),
)


@dataclass(frozen=True)
class ModeReport:
    mode: JudgmentMode
    label: str
    moded: bool
    failing_rule: Optional[str] = None
    reason: Optional[str] = None
    rules: tuple[ModedRule, ...] = field(default=(), compare=False)

    def line(self) -> str:
        status = "moded" if self.moded else f"unmoded ({self.failing_rule}: {self.reason})"
        return f"{self.mode}  {self.label}: {status}"


def classify_mode(rules: tuple[RuleSchema, ...], mode: JudgmentMode, label: str = "",
                  table: ConstraintModeTable = DEFAULT_TABLE) -> ModeReport:
    done: list[ModedRule] = []
    for rule in rules:
        result = assign_modes(rule, mode, table)
        if isinstance(result, Unmoded):
            return ModeReport(mode, label, False, rule.name, result.reason)
        done.append(result)
    return ModeReport(mode, label, True, rules=tuple(done))


def classify_table_modes(rules: tuple[RuleSchema, ...] = STLC_RULES,
                         table: ConstraintModeTable = DEFAULT_TABLE) -> list[ModeReport]:
    return [classify_mode(rules, JudgmentMode.parse(m), label, table) for m, label in APPENDIX_MODES]


def render_report(reports: list[ModeReport], table: ConstraintModeTable = DEFAULT_TABLE) -> str:
    lines = [f"constraint mode table: {table.description}"]
    lines += [r.line() for r in reports]
    return "\n".join(lines) + "\n"


def render_moded(moded: ModedRule) -> str:
    order = firing_order(moded)
    fired = ", ".join(f"{i + 1}:{_premise_name(moded.rule.premises[i])}" for i in order)
    return moded.render() + f"firing order: {fired}\n"


def _premise_name(p: Premise) -> str:
    return "judgment" if isinstance(p, JudgmentTemplate) else p.kind
