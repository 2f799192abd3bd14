"""Class lifting: hoist every nested class to the top level.

Each step takes one nested class ``c`` out of a definition ``d``.  If ``d``
is a closure with parameter ``v``, the nested class is instantiated with a
frame extended by ``v``; inside ``c`` free references to ``v`` become
``frame.local(0)`` and every existing ``frame.local(n)`` moves to
``frame.local(n + 1)``.  Thunks bind nothing, so their nested classes share
the thunk's own frame unchanged.  Frame positions here count from 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .env import EMPTY, Bind, Pair, find
from .mujava import (
    EMPTY_FRAME, ClassDef, EmptyFrame, Eql, FrameLocal, FrameVal, If,
    JavaTerm, JavaValue, JVar, Method0Def, Method1Def, New, NewFrame, NULL,
    NullClassDef,
    NewWithFrame, Send, Send0, Seq, Set,
)
from .translate import MuJavaRuntime, thunk_class

Frame = FrameVal


class LiftError(ValueError):
    pass


@dataclass
class LiftedClass:
    name: int
    kind: str  # "closure" or "thunk"
    param: Optional[str]
    body: JavaTerm

    @property
    def label(self) -> str:
        return class_label(self.name)

    def definition(self) -> ClassDef:
        if self.kind == "closure":
            return ClassDef(JVar("Closure"), (), Bind("apply", Method1Def(self.param, self.body)))
        return ClassDef(JVar("Thunk"), (), Bind("value", Method0Def(self.body)))


@dataclass
class LiftedProgram:
    classes: list[LiftedClass]
    main: JavaTerm  # the top-level expression, run with an empty frame

    @property
    def entry(self) -> Optional[int]:
        """Name of the root class when the program is a single instantiation."""
        if isinstance(self.main, NewWithFrame) and isinstance(self.main.class_expr, JVar):
            return int(self.main.class_expr.name[1:])
        return None


def class_label(name: int) -> str:
    # '$' never occurs in a parsed identifier, so labels cannot be captured.
    return f"${name}"


def frame_local(frame: FrameVal | EmptyFrame, index: int) -> JavaValue:
    """Element ``index`` of ``frame``; the first element is at position 0."""
    return frame.local(index)


# -- term traversal --------------------------------------------------------

def _children(term: JavaTerm) -> list[JavaTerm]:
    if isinstance(term, Seq):
        return [term.first, term.second]
    if isinstance(term, Send):
        return [term.target, term.arg]
    if isinstance(term, Send0):
        return [term.target]
    if isinstance(term, New):
        return [term.class_expr]
    if isinstance(term, If):
        return [term.cond, term.then, term.orelse]
    if isinstance(term, Set):
        return [term.value]
    if isinstance(term, Eql):
        return [term.left, term.right]
    if isinstance(term, NewFrame):
        return [term.head, term.tail]
    if isinstance(term, FrameLocal):
        return [term.frame]
    if isinstance(term, NewWithFrame):
        return [term.class_expr, term.frame]
    if isinstance(term, ClassDef):
        out = [term.super_class]
        node = term.methods
        stack = [node]
        while stack:
            node = stack.pop()
            if isinstance(node, Pair):
                stack += [node.right, node.left]
            elif isinstance(node, Bind):
                out.append(node.value.body)
        return out
    return []


def count_class_defs(term: JavaTerm) -> int:
    here = 1 if isinstance(term, ClassDef) else 0
    return here + sum(count_class_defs(child) for child in _children(term))


def _class_method(cls: ClassDef):
    """(kind, param, body) of a class in the trans1 image."""
    if not (isinstance(cls.super_class, JVar) and cls.attributes == () and isinstance(cls.methods, Bind)):
        raise LiftError(f"class outside the translated image: {cls!r}")
    method = cls.methods.value
    if cls.super_class.name == "Closure" and cls.methods.key == "apply" and isinstance(method, Method1Def):
        return "closure", method.param, method.body
    if cls.super_class.name == "Thunk" and cls.methods.key == "value" and isinstance(method, Method0Def):
        return "thunk", None, method.body
    raise LiftError(f"class outside the translated image: {cls!r}")


def _find_nested(term: JavaTerm) -> Optional[ClassDef]:
    """Leftmost-outermost class definition inside ``term``."""
    if isinstance(term, ClassDef):
        return term
    for child in _children(term):
        found = _find_nested(child)
        if found is not None:
            return found
    return None


def _rebuild_identity(term, target, replacement):
    if term is target:
        return replacement
    children = _children(term)
    if not any(_contains(child, target) for child in children):
        return term
    return _rebuild_one_level(term, lambda child: _rebuild_identity(child, target, replacement))


def _contains(term, target) -> bool:
    if term is target:
        return True
    return any(_contains(child, target) for child in _children(term))


def _rebuild_one_level(term, fn):
    if isinstance(term, Seq):
        return Seq(fn(term.first), fn(term.second))
    if isinstance(term, Send):
        return Send(fn(term.target), term.message, fn(term.arg))
    if isinstance(term, Send0):
        return Send0(fn(term.target), term.message)
    if isinstance(term, New):
        return New(fn(term.class_expr))
    if isinstance(term, If):
        return If(fn(term.cond), fn(term.then), fn(term.orelse))
    if isinstance(term, Set):
        return Set(term.name, fn(term.value))
    if isinstance(term, Eql):
        return Eql(fn(term.left), fn(term.right))
    if isinstance(term, NewFrame):
        return NewFrame(fn(term.head), fn(term.tail))
    if isinstance(term, FrameLocal):
        return FrameLocal(fn(term.frame), term.index)
    if isinstance(term, NewWithFrame):
        return NewWithFrame(fn(term.class_expr), fn(term.frame))
    if isinstance(term, ClassDef):
        return ClassDef(fn(term.super_class), term.attributes, _map_bodies(term.methods, fn))
    return term


def _map_bodies(methods, fn):
    if isinstance(methods, Pair):
        return Pair(_map_bodies(methods.left, fn), _map_bodies(methods.right, fn))
    if isinstance(methods, Bind):
        method = methods.value
        if isinstance(method, Method1Def):
            return Bind(methods.key, Method1Def(method.param, fn(method.body)))
        return Bind(methods.key, Method0Def(fn(method.body)))
    return methods


def _shift(term: JavaTerm) -> JavaTerm:
    if isinstance(term, FrameLocal) and term.frame == JVar("frame"):
        return FrameLocal(term.frame, term.index + 1)
    return _rebuild_one_level(term, _shift)


def _substitute(term: JavaTerm, var: str) -> JavaTerm:
    """Replace free references to ``var`` with ``frame.local(0)``."""
    if isinstance(term, JVar):
        return FrameLocal(JVar("frame"), 0) if term.name == var else term
    if isinstance(term, ClassDef):
        _, param, _ = _class_method(term)
        if param == var:
            return term  # shadowed below this binder
    return _rebuild_one_level(term, lambda child: _substitute(child, var))


# -- the pass --------------------------------------------------------------

def lift_classes(program: JavaTerm) -> LiftedProgram:
    """Lift every nested class in a translated program to the top level.

    Names are assigned in discovery order: the most recently lifted class
    that still contains nested classes is processed first, and within it
    the leftmost-outermost nested class.
    """
    # records[0] is the top-level expression: no parameter, empty frame.
    records: list[list] = [["main", None, program]]
    classes: list[LiftedClass] = []
    while True:
        index = next(
            (i for i in range(len(records) - 1, -1, -1) if _find_nested(records[i][2]) is not None),
            None,
        )
        if index is None:
            break
        _, bound, body = records[index]
        nested = _find_nested(body)
        kind, param, inner = _class_method(nested)
        name = len(classes)
        label = JVar(class_label(name))
        if bound is None:
            frame_expr: JavaTerm = JVar("frame")
        else:
            frame_expr = NewFrame(JVar(bound), JVar("frame"))
            inner = _shift(inner)
            if param != bound:
                inner = _substitute(inner, bound)
        owner = _owning_new(body, nested)
        records[index][2] = _rebuild_identity(body, owner, NewWithFrame(label, frame_expr))
        classes.append(LiftedClass(name, kind, param, inner))
        records.append([name, param, inner])
    for record in records[1:]:
        classes[record[0]].body = record[2]
    return LiftedProgram(classes, records[0][2])


def _owning_new(term: JavaTerm, cls: ClassDef) -> JavaTerm:
    """The ``New`` node whose class expression is ``cls``."""
    if isinstance(term, New) and term.class_expr is cls:
        return term
    for child in _children(term):
        found = _owning_new(child, cls)
        if found is not None:
            return found
    if term is cls:
        raise LiftError("nested class is not directly instantiated")
    return None


# -- running lifted programs -----------------------------------------------

FRAME_VALUE_CLASSES = (
    ("Value", ClassDef(NullClassDef(), (), EMPTY)),
    ("IntVal", ClassDef(JVar("Value"), (), EMPTY)),
    ("Closure", ClassDef(JVar("Value"), ("frame",), EMPTY)),
    ("Thunk", thunk_class(("frame", "cache"))),
)


def lifted_runtime(program: LiftedProgram, fuel=None) -> MuJavaRuntime:
    """A runtime with the frame-carrying value classes and every lifted class.

    Class names are bound before any definition is evaluated, so each class
    context can see every other class.
    """
    runtime = MuJavaRuntime(fuel, FRAME_VALUE_CLASSES)
    addresses = []
    for cls in program.classes:
        runtime.bind(cls.label, NULL)
        addresses.append(find(cls.label, runtime.env))
    for cls, address in zip(program.classes, addresses):
        runtime.heap = runtime.heap.write(address, runtime.run(cls.definition()))
    runtime.bind("frame", EMPTY_FRAME)
    return runtime


def run_lifted(program: LiftedProgram, fuel=None):
    """Evaluate the lifted program; returns ``(value, runtime)``."""
    runtime = lifted_runtime(program, fuel)
    return runtime.run(program.main), runtime
