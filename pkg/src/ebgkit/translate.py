"""Lambda -> muJava translation, the value back-translation, and the
consistency check between the two interpreters.

Closures become instances of anonymous ``Closure`` sub-classes with an
``apply`` method and arguments become anonymous ``Thunk`` sub-classes with a
``value`` method.  ``Thunk.force`` caches the result in its ``cache``
attribute, so on this side each argument is evaluated at most once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

from .env import EMPTY, Bind, Environment, Pair, find
from .fuel import Fuel, FuelExhausted
from .lam import (
    App, Closure, Error, Global, IntLit, IntVal, Lam, LambdaTerm,
    LambdaValue, Thunk, Var, ebg_eval,
)
from .mujava import (
    NULL, ClassDef, Eql, Heap, If, JavaMachine, JavaTerm, JavaValue, JError,
    JInt, JIntVal, JVar, Method0, Method0Def, Method1, Method1Def, New,
    NullClassDef, ObjectVal, Send, Send0, Seq, Set, This,
)

# Names the runtime binds for translated code; lambda programs may not use them.
RESERVED = frozenset({"Value", "IntVal", "Closure", "Thunk", "null", "cache", "frame"})


class TranslationError(ValueError):
    pass


class NotInImage(ValueError):
    """The value or term is not something ``trans1`` could have produced."""


# -- the value classes -----------------------------------------------------

def thunk_class(attributes=("cache",)) -> ClassDef:
    cache = JVar("cache")
    force = Method0Def(
        If(
            Eql(cache, JVar("null")),
            Seq(Set("cache", Send0(This(), "value")), cache),
            cache,
        )
    )
    return ClassDef(NullClassDef(), tuple(attributes), Bind("force", force))


VALUE_CLASSES: tuple[tuple[str, ClassDef], ...] = (
    ("Value", ClassDef(NullClassDef(), (), EMPTY)),
    ("IntVal", ClassDef(JVar("Value"), (), EMPTY)),
    ("Closure", ClassDef(JVar("Value"), (), EMPTY)),
    ("Thunk", thunk_class()),
)


class MuJavaRuntime:
    """A muJava machine with the value classes evaluated and bound.

    The heap is threaded through successive calls, so objects returned by
    :meth:`run` stay valid for later :meth:`apply` / :meth:`force` calls.
    """

    def __init__(self, fuel=None, classes=VALUE_CLASSES):
        self.machine = JavaMachine(fuel)
        address, self.heap = Heap().alloc(NULL)
        self.env: Environment = Bind("null", address)
        for name, definition in classes:
            self.bind(name, self.run(definition))

    @property
    def fuel(self) -> Fuel:
        return self.machine.fuel

    def bind(self, name: str, value: JavaValue) -> None:
        address, self.heap = self.heap.alloc(value)
        self.env = Pair(self.env, Bind(name, address))

    def run(self, term: JavaTerm) -> JavaValue:
        value, self.heap = self.machine.eval(term, self.env, self.heap, NULL)
        return value

    def apply(self, closure: JavaValue, argument: JavaValue) -> JavaValue:
        if not isinstance(closure, ObjectVal):
            return JError("apply: receiver is not an object")
        value, self.heap = self.machine.send("apply", closure.methods, argument, self.heap)
        return value

    def force(self, thunk: ObjectVal) -> JavaValue:
        value, self.heap = self.machine.send0("force", thunk.methods, self.heap)
        return value

    def int_thunk(self, n: int) -> JavaValue:
        return self.run(_thunk_of(JInt(n)))


# -- trans1 and its inverse ------------------------------------------------

def _closure_of(param: str, body: JavaTerm) -> JavaTerm:
    return New(ClassDef(JVar("Closure"), (), Bind("apply", Method1Def(param, body))))


def _thunk_of(body: JavaTerm) -> JavaTerm:
    return New(ClassDef(JVar("Thunk"), (), Bind("value", Method0Def(body))))


def trans1(term: LambdaTerm) -> JavaTerm:
    if isinstance(term, IntLit):
        return JInt(term.n)
    if isinstance(term, Var):
        _check_name(term.name)
        return Send0(JVar(term.name), "force")
    if isinstance(term, Lam):
        _check_name(term.param)
        return _closure_of(term.param, trans1(term.body))
    if isinstance(term, App):
        return Send(trans1(term.fun), "apply", _thunk_of(trans1(term.arg)))
    if isinstance(term, Global):
        raise TranslationError(
            f"global {term.package}.{term.name} has no muJava translation"
        )
    raise TypeError(f"not a lambda term: {term!r}")


def _check_name(name: str) -> None:
    if name in RESERVED:
        raise TranslationError(f"identifier {name!r} is reserved by the runtime")


def _single_method(cls: JavaTerm, super_name: str, message: str):
    if not (
        isinstance(cls, ClassDef)
        and cls.super_class == JVar(super_name)
        and cls.attributes == ()
        and isinstance(cls.methods, Bind)
        and cls.methods.key == message
    ):
        return None
    return cls.methods.value


def untrans1(term: JavaTerm) -> LambdaTerm:
    """Structural inverse of :func:`trans1`."""
    if isinstance(term, JInt):
        return IntLit(term.n)
    if isinstance(term, Send0) and term.message == "force" and isinstance(term.target, JVar):
        return Var(term.target.name)
    if isinstance(term, New):
        method = _single_method(term.class_expr, "Closure", "apply")
        if isinstance(method, Method1Def):
            return Lam(method.param, untrans1(method.body))
    if isinstance(term, Send) and term.message == "apply" and isinstance(term.arg, New):
        method = _single_method(term.arg.class_expr, "Thunk", "value")
        if isinstance(method, Method0Def):
            return App(untrans1(term.target), untrans1(method.body))
    raise NotInImage(f"not a translated lambda term: {term!r}")


# -- trans2 ----------------------------------------------------------------

def _method(obj: ObjectVal, name: str):
    return find(name, obj.methods, None)


def is_thunk_object(value: Any) -> bool:
    return isinstance(value, ObjectVal) and isinstance(_method(value, "value"), Method0)


def trans2(value: JavaValue, heap: Heap) -> LambdaValue:
    """Map a muJava result back to a lambda value.

    Closure objects recover their parameter and body through
    :func:`untrans1`; their method context is translated binding by binding,
    keeping only variables whose heap cell holds a thunk object.
    """
    return _Back(heap).value(value)


class _Back:
    def __init__(self, heap: Heap):
        self.heap = heap
        self.seen: dict[int, LambdaValue] = {}

    def value(self, value: JavaValue) -> LambdaValue:
        if isinstance(value, JIntVal):
            return IntVal(value.n)
        if isinstance(value, JError):
            return Error(value.message)
        if isinstance(value, ObjectVal):
            key = id(value)
            if key not in self.seen:
                self.seen[key] = self._object(value)
            return self.seen[key]
        raise NotInImage(f"{value!r} is not the image of a lambda value")

    def _object(self, obj: ObjectVal) -> LambdaValue:
        apply = _method(obj, "apply")
        if isinstance(apply, Method1):
            return Closure(apply.param, self.env(apply.context), untrans1(apply.body))
        delayed = _method(obj, "value")
        if isinstance(delayed, Method0):
            return Thunk(self.env(delayed.context), untrans1(delayed.body))
        raise NotInImage(f"{obj!r} is neither a closure nor a thunk")

    def env(self, context: Environment) -> Environment:
        if isinstance(context, Pair):
            return Pair(self.env(context.left), self.env(context.right))
        if isinstance(context, Bind) and context.key not in RESERVED:
            cell = self.heap.read(context.value)
            if is_thunk_object(cell):
                return Bind(context.key, self.value(cell))
        return EMPTY


# -- consistency -----------------------------------------------------------

DIVERGED = "diverged"


@dataclass(frozen=True)
class Agree:
    value: LambdaValue


@dataclass(frozen=True)
class BothDiverge:
    pass


@dataclass(frozen=True)
class Disagree:
    details: str


Verdict = Union[Agree, BothDiverge, Disagree]


def _describe(value) -> str:
    if isinstance(value, IntVal):
        return str(value.n)
    if isinstance(value, Closure):
        return "<closure>"
    if isinstance(value, Error):
        return "<error>"
    return str(value)


def check_consistency(term: LambdaTerm, fuel: int = 10**4, probe_depth: int = 3,
                      probes=(0, 1)) -> Verdict:
    """Compare ``ebg_eval`` with ``trans2 . java_eval . trans1`` on ``term``.

    Integers compare by value.  Closures are compared extensionally: both
    sides are applied to the same integer thunk for each probe and the
    results compared recursively, ``probe_depth`` levels deep.
    """
    try:
        reference: Any = ebg_eval(term, EMPTY, fuel)
    except FuelExhausted:
        reference = DIVERGED
    runtime = MuJavaRuntime(Fuel(fuel))
    try:
        result: Any = runtime.run(trans1(term))
    except FuelExhausted:
        result = DIVERGED
    outcome = _compare(reference, result, runtime, fuel, probe_depth, probes, "")
    if outcome is None:
        return BothDiverge() if reference == DIVERGED else Agree(reference)
    return Disagree(outcome)


def _compare(ref, res, runtime, fuel, depth, probes, path) -> str | None:
    where = f" at {path}" if path else ""
    if ref == DIVERGED or res == DIVERGED:
        if ref == res:
            return None
        return f"only one side ran out of fuel{where}: lambda={_describe(ref)}, muJava={res!r}"
    try:
        back = trans2(res, runtime.heap)
    except NotInImage as exc:
        return f"back-translation failed{where}: {exc}"
    if isinstance(ref, IntVal) or isinstance(back, IntVal):
        return None if ref == back else f"{_describe(ref)} != {_describe(back)}{where}"
    if isinstance(ref, Error) or isinstance(back, Error):
        both = isinstance(ref, Error) and isinstance(back, Error)
        return None if both else f"{_describe(ref)} != {_describe(back)}{where}"
    if not (isinstance(ref, Closure) and isinstance(back, Closure)):
        return f"{_describe(ref)} != {_describe(back)}{where}"
    if depth == 0:
        return None
    for p in probes:
        env = Pair(ref.env, Bind(ref.param, Thunk(EMPTY, IntLit(p))))
        try:
            ref_p: Any = ebg_eval(ref.body, env, fuel)
        except FuelExhausted:
            ref_p = DIVERGED
        runtime.machine.fuel = Fuel(fuel)
        try:
            res_p: Any = runtime.apply(res, runtime.int_thunk(p))
        except FuelExhausted:
            res_p = DIVERGED
        problem = _compare(ref_p, res_p, runtime, fuel, depth - 1, probes, f"{path}({p})")
        if problem:
            return problem
    return None
