"""muJava: a class-based object calculus with class closures.

Objects are environments of methods.  Classes capture the context they were
defined in, instantiation ties a fixed point so every method's ``this`` is
the finished object, and the evaluator threads an immutable heap through
every step.

Three nodes beyond the core calculus (``NewFrame``, ``FrameLocal`` and
``NewWithFrame``) carry the heap-allocated activation frames that class
lifting introduces.  Code produced directly from lambda terms never uses
them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .env import EMPTY, Bind, Environment, Pair, bindings, find, from_pairs, lookup, map_env
from .fuel import Fuel


# -- syntax ----------------------------------------------------------------

class JavaTerm:
    __slots__ = ()


@dataclass(frozen=True)
class Seq(JavaTerm):
    first: JavaTerm
    second: JavaTerm


@dataclass(frozen=True)
class JInt(JavaTerm):
    n: int


@dataclass(frozen=True)
class JVar(JavaTerm):
    name: str


@dataclass(frozen=True)
class NullClassDef(JavaTerm):
    pass


@dataclass(frozen=True)
class ClassDef(JavaTerm):
    super_class: JavaTerm
    attributes: tuple[str, ...]
    methods: Environment  # name -> MethodDef


@dataclass(frozen=True)
class New(JavaTerm):
    class_expr: JavaTerm


@dataclass(frozen=True)
class Send(JavaTerm):
    target: JavaTerm
    message: str
    arg: JavaTerm


@dataclass(frozen=True)
class Send0(JavaTerm):
    target: JavaTerm
    message: str


@dataclass(frozen=True)
class This(JavaTerm):
    pass


@dataclass(frozen=True)
class If(JavaTerm):
    cond: JavaTerm
    then: JavaTerm
    orelse: JavaTerm


@dataclass(frozen=True)
class Set(JavaTerm):
    name: str
    value: JavaTerm


@dataclass(frozen=True)
class Eql(JavaTerm):
    left: JavaTerm
    right: JavaTerm


@dataclass(frozen=True)
class NewFrame(JavaTerm):
    """``new Frame(head, tail)``"""

    head: JavaTerm
    tail: JavaTerm


@dataclass(frozen=True)
class FrameLocal(JavaTerm):
    """``frame.local(index)`` with 0 naming the first element."""

    frame: JavaTerm
    index: int


@dataclass(frozen=True)
class NewWithFrame(JavaTerm):
    """``new k(frame)``: instantiate and initialise the ``frame`` attribute."""

    class_expr: JavaTerm
    frame: JavaTerm


class MethodDef:
    __slots__ = ()


@dataclass(frozen=True)
class Method1Def(MethodDef):
    param: str
    body: JavaTerm


@dataclass(frozen=True)
class Method0Def(MethodDef):
    body: JavaTerm


# -- values ----------------------------------------------------------------

class JavaValue:
    __slots__ = ()


@dataclass(frozen=True)
class NullClass(JavaValue):
    pass


@dataclass(eq=False)
class ClassVal(JavaValue):
    context: Environment  # name -> address
    super_class: JavaValue
    attributes: tuple[str, ...]
    methods: Environment  # name -> MethodDef

    def __repr__(self):
        names = [name for name, _ in bindings(self.methods)]
        return f"<class {names} attrs={list(self.attributes)}>"


@dataclass(eq=False)
class ObjectVal(JavaValue):
    methods: Environment  # name -> Method

    def __repr__(self):
        names = [name for name, _ in bindings(self.methods)]
        return f"<object {names} @{id(self):x}>"


@dataclass(frozen=True)
class JIntVal(JavaValue):
    n: int


@dataclass(frozen=True)
class NullVal(JavaValue):
    pass


@dataclass(frozen=True)
class JTrue(JavaValue):
    pass


@dataclass(frozen=True)
class JFalse(JavaValue):
    pass


@dataclass(frozen=True)
class JError(JavaValue):
    message: str


@dataclass(frozen=True)
class FrameVal(JavaValue):
    """A heap frame: a linked list of slot values, extended at the front."""

    head: JavaValue
    tail: "FrameVal | EmptyFrame"

    def local(self, index: int) -> JavaValue:
        frame: FrameVal | EmptyFrame = self
        for _ in range(index):
            frame = frame.tail if isinstance(frame, FrameVal) else frame
        if not isinstance(frame, FrameVal):
            raise IndexError(f"frame index {index} out of range")
        return frame.head


@dataclass(frozen=True)
class EmptyFrame(JavaValue):
    def local(self, index: int) -> JavaValue:
        raise IndexError(f"frame index {index} out of range")


NULL_CLASS = NullClass()
NULL = NullVal()
TRUE = JTrue()
FALSE = JFalse()
EMPTY_FRAME = EmptyFrame()


class Method:
    __slots__ = ()


@dataclass(frozen=True, eq=False)
class Method1(Method):
    param: str
    context: Environment
    self_obj: ObjectVal
    body: JavaTerm


@dataclass(frozen=True, eq=False)
class Method0(Method):
    context: Environment
    self_obj: ObjectVal
    body: JavaTerm


@dataclass(frozen=True)
class NoMethod(Method):
    pass


NO_METHOD = NoMethod()


# -- heap ------------------------------------------------------------------

class _Index:
    __slots__ = ("owner", "table")

    def __init__(self, owner, table):
        self.owner = owner
        self.table = table


class Heap:
    """Cells as an environment from address to value, plus the next free address.

    Heaps are persistent.  A dict index rides along with the newest version
    so threaded evaluation reads in constant time; an older version that is
    read again rebuilds its own index from ``cells``.
    """

    __slots__ = ("cells", "next", "_index")

    def __init__(self, cells: Environment = EMPTY, next: int = 1):
        self.cells = cells
        self.next = next
        self._index: _Index | None = None

    def __eq__(self, other):
        return isinstance(other, Heap) and (self.cells, self.next) == (other.cells, other.next)

    __hash__ = None

    def __repr__(self):
        return f"Heap(next={self.next}, cells={len(self._table())})"

    def _table(self) -> dict:
        index = self._index
        if index is None or index.owner is not self:
            index = self._index = _Index(self, dict(bindings(self.cells)))
        return index.table

    def _derive(self, cells: Environment, next: int, updates) -> "Heap":
        new = Heap(cells, next)
        index = self._index
        if index is not None and index.owner is self:
            index.table.update(updates)
            index.owner = new
            new._index = index
        return new

    def read(self, address: int) -> JavaValue:
        value = self._table().get(address)
        return JError("heap") if value is None else value

    def alloc(self, value: JavaValue) -> tuple[int, "Heap"]:
        address = self.next
        return address, self._derive(Pair(self.cells, Bind(address, value)), address + 1,
                                     ((address, value),))

    def write(self, address: int, value: JavaValue) -> "Heap":
        return self._derive(Pair(self.cells, Bind(address, value)), self.next, ((address, value),))

    def extend(self, fragment: Environment) -> "Heap":
        cells = bindings(fragment)
        used = len({address for address, _ in cells})
        if not used:
            return self
        return self._derive(Pair(self.cells, fragment), self.next + used, cells)

    def addresses(self) -> set[int]:
        return set(self._table())


def used_memory(fragment: Environment) -> int:
    return len({address for address, _ in bindings(fragment)})


def allocate_atts(names: Iterable[str], base: int) -> tuple[Environment, Environment]:
    """Lay attributes out contiguously from ``base``; every cell starts Null."""
    names = list(names)
    addresses = from_pairs((name, base + i) for i, name in enumerate(names))
    cells = from_pairs((base + i, NULL) for i in range(len(names)))
    return addresses, cells


def method_def_to_method(context: Environment, self_obj: ObjectVal):
    def convert(definition: MethodDef) -> Method:
        if isinstance(definition, Method1Def):
            return Method1(definition.param, context, self_obj, definition.body)
        return Method0(context, self_obj, definition.body)

    return convert


def instantiate(cls: JavaValue, base: int, self_obj: ObjectVal):
    """Instantiate ``cls`` with attribute storage starting at ``base``.

    Returns ``(methods, attribute_addresses, heap_fragment)``.  The super
    class is instantiated first; its methods sit on the left of the merged
    table so the sub-class's definitions shadow them.  Every method carries
    ``self_obj`` as ``this``; the caller supplies the object being built,
    which closes the fixed point.
    """
    if isinstance(cls, NullClass):
        return EMPTY, EMPTY, EMPTY
    if not isinstance(cls, ClassVal):
        return JError("instantiate: not a class"), EMPTY, EMPTY
    o1, a1, h1 = instantiate(cls.super_class, base, self_obj)
    if isinstance(o1, JError):
        return o1, EMPTY, EMPTY
    a2, h2 = allocate_atts(cls.attributes, base + used_memory(h1))
    context = Pair(cls.context, Pair(a1, a2))
    o2 = map_env(method_def_to_method(context, self_obj), cls.methods)
    return Pair(o1, o2), Pair(a1, a2), Pair(h1, h2)


def java_equal(a: JavaValue, b: JavaValue) -> bool:
    if isinstance(a, (ObjectVal, ClassVal)) or isinstance(b, (ObjectVal, ClassVal)):
        return a is b
    if isinstance(a, (JIntVal, FrameVal)):
        return a == b
    return type(a) is type(b)


# -- evaluation ------------------------------------------------------------

class JavaMachine:
    """Owns the fuel and instrumentation for one muJava evaluation.

    ``sends`` counts dispatched messages per ``(message, id(receiver))`` so
    tests can observe how often a thunk's ``value`` body actually ran.
    """

    def __init__(self, fuel: Fuel | int | None = None):
        self.fuel = Fuel.coerce(fuel)
        self.sends: Counter = Counter()

    def eval(self, term: JavaTerm, env: Environment, heap: Heap, this: JavaValue):
        tick = self.fuel.tick
        while True:
            tick()
            kind = type(term)
            if kind is Seq:
                _, heap = self.eval(term.first, env, heap, this)
                term = term.second
                continue
            if kind is JInt:
                return JIntVal(term.n), heap
            if kind is JVar:
                address = lookup(term.name, env, 0)
                if address == 0:
                    return JError(f"unbound variable {term.name}"), heap
                return heap.read(address), heap
            if kind is This:
                return this, heap
            if kind is Send or kind is Send0:
                target, heap = self.eval(term.target, env, heap, this)
                if isinstance(target, JError):
                    return target, heap
                if not isinstance(target, ObjectVal):
                    return JError(f"{term.message}: receiver is not an object"), heap
                method = lookup(term.message, target.methods, NO_METHOD)
                self.sends[term.message, id(target)] += 1
                if kind is Send:
                    arg, heap = self.eval(term.arg, env, heap, this)
                    if isinstance(arg, JError):
                        return arg, heap
                    if not isinstance(method, Method1):
                        return JError(term.message), heap
                    address, heap = heap.alloc(arg)
                    env = Pair(method.context, Bind(method.param, address))
                else:
                    if not isinstance(method, Method0):
                        return JError(term.message), heap
                    env = method.context
                this = method.self_obj
                term = method.body
                continue
            if kind is If:
                cond, heap = self.eval(term.cond, env, heap, this)
                if isinstance(cond, JTrue):
                    term = term.then
                elif isinstance(cond, JFalse):
                    term = term.orelse
                elif isinstance(cond, JError):
                    return cond, heap
                else:
                    return JError("if: condition is not a boolean"), heap
                continue
            if kind is Set:
                value, heap = self.eval(term.value, env, heap, this)
                address = lookup(term.name, env, 0)
                if address == 0:
                    return JError(f"set: unbound variable {term.name}"), heap
                return value, heap.write(address, value)
            if kind is Eql:
                left, heap = self.eval(term.left, env, heap, this)
                right, heap = self.eval(term.right, env, heap, this)
                for value in (left, right):
                    if isinstance(value, JError):
                        return value, heap
                return (TRUE if java_equal(left, right) else FALSE), heap
            if kind is NullClassDef:
                return NULL_CLASS, heap
            if kind is ClassDef:
                super_class, heap = self.eval(term.super_class, env, heap, this)
                if isinstance(super_class, JError):
                    return super_class, heap
                if not isinstance(super_class, (ClassVal, NullClass)):
                    return JError("class: super-class is not a class"), heap
                return ClassVal(env, super_class, term.attributes, term.methods), heap
            if kind is New:
                cls, heap = self.eval(term.class_expr, env, heap, this)
                obj, _, heap = self.new(cls, heap)
                return obj, heap
            if kind is NewFrame:
                head, heap = self.eval(term.head, env, heap, this)
                tail, heap = self.eval(term.tail, env, heap, this)
                if not isinstance(tail, (FrameVal, EmptyFrame)):
                    return JError("frame: tail is not a frame"), heap
                return FrameVal(head, tail), heap
            if kind is FrameLocal:
                frame, heap = self.eval(term.frame, env, heap, this)
                if not isinstance(frame, (FrameVal, EmptyFrame)):
                    return JError("local: not a frame"), heap
                try:
                    return frame.local(term.index), heap
                except IndexError as exc:
                    return JError(str(exc)), heap
            if kind is NewWithFrame:
                cls, heap = self.eval(term.class_expr, env, heap, this)
                frame, heap = self.eval(term.frame, env, heap, this)
                obj, attrs, heap = self.new(cls, heap)
                if isinstance(obj, JError):
                    return obj, heap
                address = find("frame", attrs, None)
                if address is None:
                    return JError("new: class has no frame attribute"), heap
                return obj, heap.write(address, frame)
            raise TypeError(f"not a muJava term: {term!r}")

    def new(self, cls: JavaValue, heap: Heap):
        if isinstance(cls, JError):
            return cls, EMPTY, heap
        if not isinstance(cls, (ClassVal, NullClass)):
            return JError("new: not a class"), EMPTY, heap
        obj = ObjectVal(EMPTY)
        methods, attrs, fragment = instantiate(cls, heap.next, obj)
        obj.methods = methods
        return obj, attrs, heap.extend(fragment)

    def send(self, message: str, methods: Environment, argument: JavaValue, heap: Heap):
        method = lookup(message, methods, NO_METHOD)
        if not isinstance(method, Method1):
            return JError(message), heap
        self.sends[message, id(method.self_obj)] += 1
        address, heap = heap.alloc(argument)
        env = Pair(method.context, Bind(method.param, address))
        return self.eval(method.body, env, heap, method.self_obj)

    def send0(self, message: str, methods: Environment, heap: Heap):
        method = lookup(message, methods, NO_METHOD)
        if not isinstance(method, Method0):
            return JError(message), heap
        self.sends[message, id(method.self_obj)] += 1
        return self.eval(method.body, method.context, heap, method.self_obj)


def java_eval(term, env=EMPTY, heap=None, this=NULL, fuel=None):
    """Evaluate ``term``; returns ``(value, heap)``."""
    return JavaMachine(fuel).eval(term, env, heap or Heap(), this)


def send_message(message, methods, argument, heap, fuel=None):
    """Dispatch a one-argument message to an object's method table."""
    return JavaMachine(fuel).send(message, methods, argument, heap)


def send_message0(message, methods, heap, fuel=None):
    return JavaMachine(fuel).send0(message, methods, heap)


# -- printing --------------------------------------------------------------

def show(term: JavaTerm) -> str:
    """Constructor-form rendering of a term."""

    def p(t):
        text = show(t)
        return text if " " not in text else f"({text})"

    if isinstance(term, Seq):
        return f"Seq {p(term.first)} {p(term.second)}"
    if isinstance(term, JInt):
        return f"JavaInt {term.n}"
    if isinstance(term, JVar):
        return f'JavaVar "{term.name}"'
    if isinstance(term, NullClassDef):
        return "NullClassDef"
    if isinstance(term, ClassDef):
        attrs = "[" + ",".join(f'"{a}"' for a in term.attributes) + "]"
        return f"ClassDef {p(term.super_class)} {attrs} ({show_methods(term.methods)})"
    if isinstance(term, New):
        return f"New {p(term.class_expr)}"
    if isinstance(term, Send):
        return f'Send {p(term.target)} "{term.message}" {p(term.arg)}'
    if isinstance(term, Send0):
        return f'Send0 {p(term.target)} "{term.message}"'
    if isinstance(term, This):
        return "This"
    if isinstance(term, If):
        return f"If {p(term.cond)} {p(term.then)} {p(term.orelse)}"
    if isinstance(term, Set):
        return f'Set "{term.name}" {p(term.value)}'
    if isinstance(term, Eql):
        return f"Eql {p(term.left)} {p(term.right)}"
    if isinstance(term, NewFrame):
        return f"NewFrame {p(term.head)} {p(term.tail)}"
    if isinstance(term, FrameLocal):
        return f"FrameLocal {p(term.frame)} {term.index}"
    if isinstance(term, NewWithFrame):
        return f"NewWithFrame {p(term.class_expr)} {p(term.frame)}"
    raise TypeError(f"not a muJava term: {term!r}")


def show_methods(methods: Environment) -> str:
    if isinstance(methods, Pair):
        return f"Pair ({show_methods(methods.left)}) ({show_methods(methods.right)})"
    if isinstance(methods, Bind):
        method = methods.value
        if isinstance(method, Method1Def):
            body = f'MethodDef "{method.param}" ({show(method.body)})'
        else:
            body = f"MethodDef0 ({show(method.body)})"
        return f'Bind "{methods.key}" ({body})'
    return "Empty"
