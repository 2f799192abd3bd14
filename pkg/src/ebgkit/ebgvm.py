"""The intermediate stack-machine code and the compiler from lambda terms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import lam
from .env import EMPTY, Environment, lookup


class EbgInstr:
    __slots__ = ()


@dataclass(frozen=True)
class PushInt(EbgInstr):
    n: int


@dataclass(frozen=True)
class Local(EbgInstr):
    index: int  # 1 names the innermost binding


@dataclass(frozen=True)
class Global(EbgInstr):
    package: str
    name: str


@dataclass(frozen=True)
class PushLambda(EbgInstr):
    body: tuple[EbgInstr, ...]


@dataclass(frozen=True)
class App(EbgInstr):
    pass


@dataclass(frozen=True)
class Force(EbgInstr):
    pass


@dataclass(frozen=True)
class Delay(EbgInstr):
    body: tuple[EbgInstr, ...]


class CompileError(ValueError):
    pass


def pos(name: str, names: Sequence[str]) -> int:
    """1-based position of the first (innermost) occurrence."""
    return list(names).index(name) + 1


def compile_term(term: lam.LambdaTerm, vars: Sequence[str] = (),
                 globals: Environment = EMPTY) -> list[EbgInstr]:
    """Compile ``term`` where ``vars`` lists the enclosing binders innermost
    first and ``globals`` maps top-level names to their defining package.

    A local binder takes precedence over a global of the same name.
    """
    if isinstance(term, lam.IntLit):
        return [PushInt(term.n)]
    if isinstance(term, lam.Var):
        if term.name in vars:
            return [Local(pos(term.name, vars)), Force()]
        package = lookup(term.name, globals, "")
        if package == "":
            raise CompileError(f"unbound variable {term.name}")
        return [Global(package, term.name), Force()]
    if isinstance(term, lam.Global):
        return [Global(term.package, term.name), Force()]
    if isinstance(term, lam.Lam):
        return [PushLambda(tuple(compile_term(term.body, [term.param, *vars], globals)))]
    if isinstance(term, lam.App):
        return [
            *compile_term(term.fun, vars, globals),
            Delay(tuple(compile_term(term.arg, vars, globals))),
            App(),
        ]
    raise TypeError(f"not a lambda term: {term!r}")


def render(instrs: Sequence[EbgInstr]) -> str:
    """Canonical one-line text, in the notation used for golden files."""
    return "[" + ", ".join(render_instr(i) for i in instrs) + "]"


def render_instr(instr: EbgInstr) -> str:
    if isinstance(instr, PushInt):
        return f"PushInt({instr.n})"
    if isinstance(instr, Local):
        return f"Local({instr.index})"
    if isinstance(instr, Global):
        return f"Global({instr.package},{instr.name})"
    if isinstance(instr, PushLambda):
        return "PushLambda " + render(instr.body)
    if isinstance(instr, Delay):
        return "Delay " + render(instr.body)
    return type(instr).__name__


def max_local_depth_ok(instrs: Sequence[EbgInstr], depth: int = 0) -> bool:
    """Every ``Local`` index is within the binder depth at its position."""
    for instr in instrs:
        if isinstance(instr, Local) and not 1 <= instr.index <= depth:
            return False
        if isinstance(instr, PushLambda) and not max_local_depth_ok(instr.body, depth + 1):
            return False
        if isinstance(instr, Delay) and not max_local_depth_ok(instr.body, depth):
            return False
    return True
