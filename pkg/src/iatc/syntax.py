"""Surface syntax: terms, types, schemes and contexts.

Grammar::

    term    := lam | let | app
    lam     := "\\" NAME [":" type] "." term
    let     := "let" NAME "=" term "in" term
    app     := atom { atom }
    atom    := NAME | "(" term ")"
    type    := atype ["->" type]
    atype   := NAME | "(" type ")"
    scheme  := ["forall" NAME {NAME} "."] type
    context := [binding {"," binding}]
    binding := NAME ":" scheme

Uppercase type names are base types, lowercase ones are rigid variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .types import Arrow, Base, Context, Forall, MonoType, Rigid

KEYWORDS = frozenset({"let", "in", "forall"})


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lam:
    binder: str
    body: "Term"


@dataclass(frozen=True)
class ALam:
    binder: str
    annotation: MonoType
    body: "Term"


@dataclass(frozen=True)
class App:
    fun: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Let:
    binder: str
    bound: "Term"
    body: "Term"


Term = Union[Var, Lam, ALam, App, Let]


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    if isinstance(t, (Lam, ALam)):
        return 1 + term_size(t.body)
    if isinstance(t, App):
        return 1 + term_size(t.fun) + term_size(t.arg)
    return 1 + term_size(t.bound) + term_size(t.body)


def term_depth(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    if isinstance(t, (Lam, ALam)):
        return 1 + term_depth(t.body)
    if isinstance(t, App):
        return 1 + max(term_depth(t.fun), term_depth(t.arg))
    return 1 + max(term_depth(t.bound), term_depth(t.body))


def free_term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, (Lam, ALam)):
        return free_term_vars(t.body) - {t.binder}
    if isinstance(t, App):
        return free_term_vars(t.fun) | free_term_vars(t.arg)
    return free_term_vars(t.bound) | (free_term_vars(t.body) - {t.binder})


def has_let(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Let):
        return True
    if isinstance(t, (Lam, ALam)):
        return has_let(t.body)
    return has_let(t.fun) or has_let(t.arg)


# -- lexing -----------------------------------------------------------------

class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{line}:{column}: {message}{detail}")


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, a keyword, a symbol, or EOF
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<arrow>->)
  | (?P<sym>[\\.():=,])
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, column)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ws":
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                line_start = pos + chunk.rfind("\n") + 1
        elif kind == "name":
            tokens.append(Token(chunk if chunk in KEYWORDS else "NAME", chunk, line, column))
        else:
            tokens.append(Token(chunk, chunk, line, column))
        pos = m.end()
    tokens.append(Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


# -- parsing -----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: set[str], what: Optional[str] = None) -> ParseError:
        tok = self.peek
        found = "end of input" if tok.kind == "EOF" else repr(tok.text)
        return ParseError(what or f"unexpected {found}", tok.line, tok.column, frozenset(expected))

    def expect(self, kind: str) -> Token:
        if self.peek.kind != kind:
            raise self.fail({kind})
        return self.advance()

    def name(self, lowercase: Optional[bool] = None) -> str:
        tok = self.expect("NAME")
        if lowercase and not tok.text[0].islower():
            raise ParseError(f"variable {tok.text!r} must start with a lowercase letter",
                             tok.line, tok.column, frozenset({"NAME"}))
        return tok.text

    def end(self) -> None:
        if self.peek.kind != "EOF":
            raise self.fail({"EOF"})

    # terms

    def term(self) -> "Term":
        kind = self.peek.kind
        if kind == "\\":
            self.advance()
            binder = self.name(lowercase=True)
            annotation = None
            if self.peek.kind == ":":
                self.advance()
                annotation = self.type()
            self.expect(".")
            body = self.term()
            return Lam(binder, body) if annotation is None else ALam(binder, annotation, body)
        if kind == "let":
            self.advance()
            binder = self.name(lowercase=True)
            self.expect("=")
            bound = self.term()
            self.expect("in")
            return Let(binder, bound, self.term())
        return self.app()

    def app(self) -> "Term":
        result = self.atom()
        while self.peek.kind in ("NAME", "("):
            result = App(result, self.atom())
        return result

    def atom(self) -> "Term":
        if self.peek.kind == "NAME":
            return Var(self.name(lowercase=True))
        if self.peek.kind == "(":
            self.advance()
            inner = self.term()
            self.expect(")")
            return inner
        raise self.fail({"NAME", "(", "\\", "let"})

    # types

    def type(self) -> MonoType:
        param = self.atype()
        if self.peek.kind == "->":
            self.advance()
            return Arrow(param, self.type())
        return param

    def atype(self) -> MonoType:
        if self.peek.kind == "NAME":
            text = self.advance().text
            return Base(text) if text[0].isupper() else Rigid(text)
        if self.peek.kind == "(":
            self.advance()
            inner = self.type()
            self.expect(")")
            return inner
        raise self.fail({"NAME", "("})

    def scheme(self) -> Forall:
        if self.peek.kind != "forall":
            return Forall((), self.type())
        self.advance()
        bound: list[str] = []
        while self.peek.kind == "NAME":
            tok = self.peek
            name = self.name(lowercase=True)
            if name in bound:
                raise ParseError(f"duplicate bound variable {name!r}", tok.line, tok.column)
            bound.append(name)
        if not bound:
            raise self.fail({"NAME"})
        self.expect(".")
        return Forall(tuple(bound), self.type())

    def context(self) -> Context:
        ctx = Context()
        if self.peek.kind == "EOF":
            return ctx
        while True:
            name = self.name(lowercase=True)
            self.expect(":")
            ctx = ctx.extend(name, self.scheme())
            if self.peek.kind != ",":
                return ctx
            self.advance()


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.end()
    return t


def parse_type(text: str) -> MonoType:
    p = _Parser(text)
    t = p.type()
    p.end()
    return t


def parse_scheme(text: str) -> Forall:
    p = _Parser(text)
    s = p.scheme()
    p.end()
    return s


def parse_context(text: str) -> Context:
    p = _Parser(text)
    ctx = p.context()
    p.end()
    return ctx


# -- printing -----------------------------------------------------------------

def print_type(t: MonoType) -> str:
    return str(t)


def print_scheme(s: Forall) -> str:
    return str(s)


def print_context(ctx: Context) -> str:
    return str(ctx)


def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Lam):
        return f"\\{t.binder}. {print_term(t.body)}"
    if isinstance(t, ALam):
        return f"\\{t.binder} : {t.annotation}. {print_term(t.body)}"
    if isinstance(t, Let):
        return f"let {t.binder} = {print_term(t.bound)} in {print_term(t.body)}"
    fun = print_term(t.fun)
    if isinstance(t.fun, (Lam, ALam, Let)):
        fun = f"({fun})"
    arg = print_term(t.arg)
    if not isinstance(t.arg, Var):
        arg = f"({arg})"
    return f"{fun} {arg}"
