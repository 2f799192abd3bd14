"""The lambda front end: terms, values, concrete syntax and ``ebg_eval``.

``ebg_eval`` is the normal-order reference interpreter.  Arguments are
passed as thunks over the caller's environment and are re-evaluated on every
variable hit; nothing is memoized here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .env import EMPTY, Bind, Environment, Pair, lookup
from .fuel import Fuel


# -- terms -----------------------------------------------------------------

class LambdaTerm:
    __slots__ = ()


@dataclass(frozen=True)
class IntLit(LambdaTerm):
    n: int


@dataclass(frozen=True)
class Var(LambdaTerm):
    name: str


@dataclass(frozen=True)
class Lam(LambdaTerm):
    param: str
    body: LambdaTerm


@dataclass(frozen=True)
class App(LambdaTerm):
    fun: LambdaTerm
    arg: LambdaTerm


@dataclass(frozen=True)
class Global(LambdaTerm):
    """A qualified reference ``Package.name`` to a top-level definition."""

    package: str
    name: str


# -- values ----------------------------------------------------------------

class LambdaValue:
    __slots__ = ()


@dataclass(frozen=True)
class IntVal(LambdaValue):
    n: int


@dataclass(frozen=True)
class Closure(LambdaValue):
    param: str
    env: Environment
    body: LambdaTerm


@dataclass(frozen=True)
class Thunk(LambdaValue):
    env: Environment
    body: LambdaTerm


@dataclass(frozen=True)
class Error(LambdaValue):
    reason: str = field(default="", compare=False)


ERROR = Error()

GlobalResolver = Callable[[str, str], Optional[LambdaTerm]]


def ebg_eval(
    term: LambdaTerm,
    env: Environment = EMPTY,
    fuel: Fuel | int | None = None,
    globals: GlobalResolver | None = None,
) -> LambdaValue:
    """Evaluate ``term`` in normal order.

    ``env`` must bind names to :class:`Thunk` values.  One unit of fuel is
    spent per evaluation step, where a step is one call of the recursive
    definition; the loop below unfolds those calls so that only the
    function position of an application needs a pending-argument stack.
    ``globals`` maps ``(package, name)`` to a closed term; it is evaluated
    afresh in the empty environment each time it is referenced.

    Raises :class:`~ebgkit.fuel.FuelExhausted` when the budget runs out.
    """
    fuel = Fuel.coerce(fuel)
    pending: list[Thunk] = []
    while True:
        fuel.tick()
        if isinstance(term, App):
            pending.append(Thunk(env, term.arg))
            term = term.fun
            continue
        if isinstance(term, Var):
            found = lookup(term.name, env, ERROR)
            if not isinstance(found, Thunk):
                return Error(f"unbound variable {term.name}")
            term, env = found.body, found.env
            continue
        if isinstance(term, Global):
            target = globals(term.package, term.name) if globals else None
            if target is None:
                return Error(f"unresolved global {term.package}.{term.name}")
            term, env = target, EMPTY
            continue
        if isinstance(term, IntLit):
            value: LambdaValue = IntVal(term.n)
        elif isinstance(term, Lam):
            value = Closure(term.param, env, term.body)
        else:
            raise TypeError(f"not a lambda term: {term!r}")
        if not pending:
            return value
        if not isinstance(value, Closure):
            return Error("application of a non-function")
        thunk = pending.pop()
        env = Pair(value.env, Bind(value.param, thunk))
        term = value.body


# -- helpers ---------------------------------------------------------------

def size(term: LambdaTerm) -> int:
    if isinstance(term, Lam):
        return 1 + size(term.body)
    if isinstance(term, App):
        return 1 + size(term.fun) + size(term.arg)
    return 1


def free_vars(term: LambdaTerm) -> frozenset[str]:
    if isinstance(term, Var):
        return frozenset([term.name])
    if isinstance(term, Lam):
        return free_vars(term.body) - {term.param}
    if isinstance(term, App):
        return free_vars(term.fun) | free_vars(term.arg)
    return frozenset()


def has_globals(term: LambdaTerm) -> bool:
    if isinstance(term, Global):
        return True
    if isinstance(term, Lam):
        return has_globals(term.body)
    if isinstance(term, App):
        return has_globals(term.fun) or has_globals(term.arg)
    return False


def show(term: LambdaTerm) -> str:
    """Constructor-form rendering, e.g. ``Lam "x" (Var "x")``."""
    if isinstance(term, IntLit):
        return f"IntLit {term.n}"
    if isinstance(term, Var):
        return f'Var "{term.name}"'
    if isinstance(term, Global):
        return f'Global "{term.package}" "{term.name}"'
    if isinstance(term, Lam):
        return f'Lam "{term.param}" ({show(term.body)})'
    return f"App ({show(term.fun)}) ({show(term.arg)})"


def to_source(term: LambdaTerm) -> str:
    """Concrete syntax accepted by :func:`parse`."""
    if isinstance(term, IntLit):
        return str(term.n)
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Global):
        return f"{term.package}.{term.name}"
    if isinstance(term, Lam):
        return f"\\{term.param}. {to_source(term.body)}"
    fun = to_source(term.fun)
    if isinstance(term.fun, Lam):
        fun = f"({fun})"
    arg = to_source(term.arg)
    if isinstance(term.arg, (Lam, App)):
        arg = f"({arg})"
    return f"{fun} {arg}"


# -- concrete syntax -------------------------------------------------------

class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>;;;[^\n]*)
  | (?P<qname>[A-Za-z_][A-Za-z0-9_']*\.[A-Za-z_][A-Za-z0-9_']*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<int>-?[0-9]+)
  | (?P<lam>[\\λ])
  | (?P<punct>[.()=;,])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "qname" and tokens and tokens[-1].kind == "lam":
            # "\x.x" binds x; it is not the qualified name x.x
            m = _TOKEN_RE.match(text, pos, pos + chunk.index("."))
            kind, chunk = "ident", m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(chunk if kind == "punct" else kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos += len(chunk)
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class TermParser:
    """Recursive-descent parser over a token list.

    A term ends at the first token that cannot continue it, so package
    sources can drive the same parser and consume their own ``;``.
    """

    def __init__(self, tokens: list[Token], pos: int = 0):
        self.tokens = tokens
        self.pos = pos

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.tok
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise ParseError(f"expected {kind!r}, found {found!r}", tok.line, tok.col)
        return self.advance()

    def term(self) -> LambdaTerm:
        if self.tok.kind == "lam":
            self.advance()
            param = self.expect("ident").text
            self.expect(".")
            return Lam(param, self.term())
        return self.application()

    def application(self) -> LambdaTerm:
        result = self.atom()
        while self.tok.kind in ("int", "ident", "qname", "(", "lam"):
            if self.tok.kind == "lam":
                # a trailing abstraction extends as far right as possible
                return App(result, self.term())
            result = App(result, self.atom())
        return result

    def atom(self) -> LambdaTerm:
        tok = self.tok
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text))
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        if tok.kind == "qname":
            self.advance()
            package, name = tok.text.split(".")
            return Global(package, name)
        if tok.kind == "(":
            self.advance()
            inner = self.term()
            self.expect(")")
            return inner
        found = tok.text or "end of input"
        raise ParseError(f"expected a term, found {found!r}", tok.line, tok.col)


def parse(source: str) -> LambdaTerm:
    parser = TermParser(tokenize(source))
    term = parser.term()
    parser.expect("eof")
    return term


# -- golden terms ----------------------------------------------------------

W = Lam("x", App(Var("x"), Var("x")))
OMEGA = App(W, W)
M = App(Lam("x", IntLit(1)), OMEGA)
M1 = Lam(
    "x",
    App(
        Lam("y", App(Var("y"), Var("x"))),
        Lam("z", App(Var("x"), Var("z"))),
    ),
)
