"""Type inference by telescopic constraint trees for a small lambda calculus."""

from .solver import Ambiguous, Failed, FailureKind, Solved, Verdict, check, classify, free_vars, infer
from .syntax import parse_context, parse_scheme, parse_term, parse_type, print_term
from .treegen import Start, build_tree

__all__ = [
    "Ambiguous", "Failed", "FailureKind", "Solved", "Verdict", "check", "classify", "free_vars", "infer",
    "parse_context", "parse_scheme", "parse_term", "parse_type", "print_term", "Start", "build_tree",
]
