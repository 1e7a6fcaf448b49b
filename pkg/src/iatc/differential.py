"""Differential comparison of the solver against the reference inferencers."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

from .oracle import FuzzConfig, OracleError, algorithm_m, algorithm_w, corpus, equiv_scheme
from .solver import Failed, Solved, infer
from .syntax import Term, print_term
from .treegen import Start
from .types import Context, Forall

Reference = Callable[[Context, Term], Forall]


@dataclass(frozen=True)
class Case:
    term: str
    solver: str      # "SAT", a failure kind, or "UNKNOWN"
    reference: str   # "SAT" or a failure kind
    solver_scheme: Optional[Forall] = None
    reference_scheme: Optional[Forall] = None

    @property
    def verdict_agrees(self) -> bool:
        return (self.solver == "SAT") == (self.reference == "SAT")

    @property
    def kind_agrees(self) -> bool:
        return self.solver == self.reference

    def __str__(self) -> str:
        mine = f"{self.solver} {self.solver_scheme or ''}".rstrip()
        theirs = f"{self.reference} {self.reference_scheme or ''}".rstrip()
        return f"{self.term}\n  solver:    {mine}\n  reference: {theirs}"


@dataclass
class Report:
    seed: int
    count: int
    reference: str
    outcomes: Counter = field(default_factory=Counter)
    verdict_mismatches: list[Case] = field(default_factory=list)
    kind_mismatches: list[Case] = field(default_factory=list)
    scheme_mismatches: list[Case] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.verdict_mismatches or self.kind_mismatches or self.scheme_mismatches)

    @property
    def counterexamples(self) -> list[str]:
        return [str(c) for c in self.verdict_mismatches + self.scheme_mismatches + self.kind_mismatches]

    def summary(self) -> dict:
        return {
            "seed": self.seed, "count": self.count, "reference": self.reference,
            "outcomes": {k: self.outcomes[k] for k in sorted(self.outcomes)},
            "verdict_mismatches": len(self.verdict_mismatches),
            "kind_mismatches": len(self.kind_mismatches),
            "scheme_mismatches": len(self.scheme_mismatches),
        }

    def render(self) -> str:
        s = self.summary()
        lines = [f"seed {self.seed}, {self.count} terms, reference {self.reference}"]
        lines += [f"  {k}: {v}" for k, v in s["outcomes"].items()]
        lines.append(f"verdict mismatches: {s['verdict_mismatches']}")
        lines.append(f"scheme mismatches: {s['scheme_mismatches']}")
        lines.append(f"failure-kind mismatches: {s['kind_mismatches']}")
        if self.counterexamples:
            lines.append("first counterexample:")
            lines.append(self.counterexamples[0])
        return "\n".join(lines) + "\n"


REFERENCES: dict[str, Reference] = {"W": algorithm_w, "M": algorithm_m}


def compare(t: Term, reference: Reference = algorithm_w, ctx: Context = Context()) -> Case:
    outcome = infer(t, ctx, "hm", Start.POLY)
    mine_scheme: Optional[Forall] = None
    if isinstance(outcome, Solved):
        mine = "SAT"
        mine_scheme = outcome.result if isinstance(outcome.result, Forall) else Forall((), outcome.result)
    elif isinstance(outcome, Failed):
        mine = outcome.kind.value
    else:
        mine = "UNKNOWN"
    scheme: Optional[Forall] = None
    try:
        scheme, kind = reference(ctx, t), "SAT"
    except OracleError as exc:
        kind = exc.kind
    return Case(print_term(t), mine, kind, mine_scheme, scheme)


def differential(seed: int, count: int, reference: str = "W",
                 config: FuzzConfig = FuzzConfig()) -> Report:
    ref = REFERENCES[reference]
    report = Report(seed, count, reference)
    for t in corpus(seed, count, config):
        case = compare(t, ref)
        report.outcomes[case.solver] += 1
        if not case.verdict_agrees:
            report.verdict_mismatches.append(case)
        elif not case.kind_agrees:
            report.kind_mismatches.append(case)
        elif case.solver == "SAT" and not equiv_scheme(case.solver_scheme, case.reference_scheme):
            report.scheme_mismatches.append(case)
    return report
