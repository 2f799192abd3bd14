"""Target stack-VM code, the ``trans3`` translation with class lifting, and
an executor for the resulting classes.

Inside a method, local 0 is the receiver (a closure or thunk object) and
local 1 is the current frame.  ``apply`` runs the closure's code with its
frame extended by the argument; ``force`` runs a thunk's code at most once
and caches the result.  Frame slots on this path count from 1.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from . import ebgvm
from .fuel import Fuel, FuelExhausted
from .lam import Closure, Error, IntLit, IntVal, Thunk, ebg_eval
from .env import EMPTY as _NO_ENV, Bind, Pair

APPLY = "apply(LThunk;)LValue;"
FORCE = "force()LValue;"
LOCAL = "local(I)LValue;"
INIT = "<init>(LFrame;)V"
THUNK_DESCRIPTOR = "LThunk;"
SIGNATURES = frozenset({APPLY, FORCE, LOCAL, INIT})


# -- instructions and classes ----------------------------------------------

class TargetInstr:
    __slots__ = ()


@dataclass(frozen=True)
class VMNew(TargetInstr):
    index: int


@dataclass(frozen=True)
class Aload0(TargetInstr):
    pass


@dataclass(frozen=True)
class Aload1(TargetInstr):
    pass


@dataclass(frozen=True)
class Astore1(TargetInstr):
    pass


@dataclass(frozen=True)
class Bipush(TargetInstr):
    n: int


@dataclass(frozen=True)
class GetStatic(TargetInstr):
    package: str
    name: str
    descriptor: str = THUNK_DESCRIPTOR


@dataclass(frozen=True)
class Return(TargetInstr):
    pass


@dataclass(frozen=True)
class InvokeVirtual(TargetInstr):
    signature: str


@dataclass(frozen=True)
class GetField(TargetInstr):
    field: str


@dataclass(frozen=True)
class Dup(TargetInstr):
    pass


@dataclass(frozen=True)
class InvokeSpecial(TargetInstr):
    signature: str


@dataclass(frozen=True)
class VMClosure:
    name: int
    code: tuple[TargetInstr, ...]


@dataclass(frozen=True)
class VMThunk:
    name: int
    code: tuple[TargetInstr, ...]


VmClass = VMClosure | VMThunk

_INSTANTIATE = (Dup(), Aload1(), InvokeSpecial(INIT))
_THUNK_PROLOGUE = (GetField("frame"), Astore1())


# -- trans3 ----------------------------------------------------------------

def trans3(instr: ebgvm.EbgInstr, classes: Sequence[VmClass]):
    """Translate one instruction; returns ``(instrs, classes')``.

    Every ``PushLambda`` and ``Delay`` body becomes a new class whose name
    is its position in ``classes``; the name is reserved before the body is
    translated, so nested classes get later numbers.
    """
    if isinstance(instr, ebgvm.PushInt):
        return [Bipush(instr.n)], list(classes)
    if isinstance(instr, ebgvm.Local):
        return [Aload1(), Bipush(instr.index), InvokeVirtual(LOCAL)], list(classes)
    if isinstance(instr, ebgvm.Global):
        return [GetStatic(instr.package, instr.name, THUNK_DESCRIPTOR)], list(classes)
    if isinstance(instr, ebgvm.App):
        return [InvokeVirtual(APPLY)], list(classes)
    if isinstance(instr, ebgvm.Force):
        return [InvokeVirtual(FORCE)], list(classes)
    if isinstance(instr, (ebgvm.PushLambda, ebgvm.Delay)):
        name = len(classes)
        body, out = maptrans3(instr.body, [*classes, None])
        if isinstance(instr, ebgvm.PushLambda):
            out[name] = VMClosure(name, (*body, Return()))
        else:
            out[name] = VMThunk(name, (*_THUNK_PROLOGUE, *body, Return()))
        return [VMNew(name), *_INSTANTIATE], out
    raise TypeError(f"not an EBG VM instruction: {instr!r}")


def maptrans3(instrs: Sequence[ebgvm.EbgInstr], classes: Sequence[VmClass]):
    out: list[TargetInstr] = []
    classes = list(classes)
    for instr in instrs:
        code, classes = trans3(instr, classes)
        out.extend(code)
    return out, classes


def compile_program(term) -> tuple[list[TargetInstr], list[VmClass]]:
    """Entry code (ending in ``Return``) and class list for a closed term."""
    code, classes = maptrans3(ebgvm.compile_term(term), [])
    return [*code, Return()], classes


# -- rendering -------------------------------------------------------------

def render_instr(instr: TargetInstr) -> str:
    if isinstance(instr, VMNew):
        return f"VMNew({instr.index})"
    if isinstance(instr, Bipush):
        return f"Bipush({instr.n})"
    if isinstance(instr, GetStatic):
        return f"GetStatic({instr.package},{instr.name},{instr.descriptor})"
    if isinstance(instr, (InvokeVirtual, InvokeSpecial)):
        return f"{type(instr).__name__}({instr.signature})"
    if isinstance(instr, GetField):
        return f"GetField({instr.field})"
    return type(instr).__name__


def render_code(code: Sequence[TargetInstr]) -> str:
    return "[" + ",".join(render_instr(i) for i in code) + "]"


def render_class(cls: VmClass) -> str:
    return f"{type(cls).__name__} {cls.name}\n{render_code(cls.code)}"


def render_program(code: Sequence[TargetInstr], classes: Sequence[VmClass]) -> str:
    """Entry code, then classes newest first (the order the class list is
    built in by consing)."""
    parts = [render_code(code)]
    parts += [render_class(cls) for cls in sorted(classes, key=lambda c: -c.name)]
    return "\n\n".join(parts)


# -- runtime values --------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    head: Any
    tail: Optional["Frame"]

    def slot(self, n: int):
        """Element ``n`` counting from 1 at the head."""
        frame: Optional[Frame] = self
        for _ in range(n - 1):
            frame = frame.tail if frame is not None else None
        if frame is None or n < 1:
            raise IndexError(n)
        return frame.head


EMPTY_FRAME: Optional[Frame] = None


@dataclass(frozen=True)
class IntCell:
    n: int


@dataclass(eq=False)
class ClosureObj:
    table: "ClassTable" = field(repr=False)
    index: int
    frame: Optional[Frame]


@dataclass(eq=False)
class ThunkObj:
    table: "ClassTable" = field(repr=False)
    index: int
    frame: Optional[Frame]
    cache: Any = None


@dataclass(frozen=True)
class FrameRef:
    frame: Optional[Frame]


@dataclass(eq=False)
class Uninitialized:
    table: "ClassTable" = field(repr=False)
    index: int


class ClassTable:
    """Index -> class lookup for one compilation unit."""

    def __init__(self, classes: Sequence[VmClass], name: str = "<main>"):
        self.classes = list(classes)
        self.name = name

    def __getitem__(self, index: int) -> VmClass:
        if not 0 <= index < len(self.classes):
            raise Unresolved(f"class {index} is not defined in {self.name}")
        return self.classes[index]


# -- errors ----------------------------------------------------------------

class VMError(Exception):
    pass


class StackUnderflow(VMError):
    pass


class TypeMismatch(VMError):
    pass


class Unresolved(VMError):
    pass


# -- executor --------------------------------------------------------------

@dataclass
class Activation:
    receiver: Any
    frame: Optional[Frame]
    code: Sequence[TargetInstr]
    table: ClassTable
    base: int
    pc: int = 0
    thunk: Optional[ThunkObj] = None


GlobalResolver = Callable[[str, str], ThunkObj]


class TargetVM:
    """Executes target code.

    ``globals`` resolves ``GetStatic`` to a thunk object; the result is
    cached per VM, so a global is evaluated at most once per run.
    ``steps`` counts executed instructions and ``entries`` counts method
    activations per receiver object.
    """

    def __init__(self, fuel: Fuel | int | None = None, globals: GlobalResolver | None = None,
                 trace: Callable[[str], None] | None = None):
        self.fuel = Fuel.coerce(fuel)
        self.resolve_global = globals
        self.trace = trace
        self.stack: list = []
        self.calls: list[Activation] = []
        self.statics: dict[tuple[str, str], ThunkObj] = {}
        self.steps = 0
        self.entries: Counter = Counter()

    # public entry points

    def run(self, code: Sequence[TargetInstr], table: ClassTable | Sequence[VmClass] = ()):
        if not isinstance(table, ClassTable):
            table = ClassTable(table)
        self._push(Activation(None, EMPTY_FRAME, code, table, len(self.stack)))
        return self._loop()

    def force(self, thunk: ThunkObj):
        self.stack.append(thunk)
        return self._invoke_now(FORCE)

    def apply(self, closure, argument: ThunkObj):
        self.stack.append(closure)
        self.stack.append(argument)
        return self._invoke_now(APPLY)

    def get_static(self, package: str, name: str) -> ThunkObj:
        key = (package, name)
        if key not in self.statics:
            if self.resolve_global is None:
                raise Unresolved(f"no loader to resolve {package}.{name}")
            self.statics[key] = self.resolve_global(package, name)
        return self.statics[key]

    # machinery

    def _invoke_now(self, signature: str):
        depth = len(self.calls)
        self._invoke(signature)
        if len(self.calls) == depth:  # answered from a thunk cache
            return self.stack.pop()
        return self._loop()

    def _push(self, activation: Activation) -> None:
        self.calls.append(activation)
        self.entries[id(activation.receiver)] += 1

    def _pop(self):
        if not self.stack:
            raise StackUnderflow("operand stack underflow")
        return self.stack.pop()

    def _loop(self):
        stop = len(self.calls) - 1
        stack = self.stack
        while len(self.calls) > stop:
            act = self.calls[-1]
            if act.pc >= len(act.code):
                raise VMError("code ended without Return")
            instr = act.code[act.pc]
            act.pc += 1
            self.fuel.tick()
            self.steps += 1
            if self.trace is not None:
                self.trace(f"{len(self.calls) - 1:4d} {act.pc - 1:3d} {render_instr(instr):34s} stack={len(stack)}")
            kind = type(instr)
            if kind is Aload1:
                stack.append(FrameRef(act.frame))
            elif kind is Bipush:
                stack.append(IntCell(instr.n))
            elif kind is InvokeVirtual:
                self._invoke(instr.signature)
            elif kind is Dup:
                if not stack:
                    raise StackUnderflow("dup on empty stack")
                stack.append(stack[-1])
            elif kind is VMNew:
                act.table[instr.index]
                stack.append(Uninitialized(act.table, instr.index))
            elif kind is InvokeSpecial:
                self._initialise(instr.signature)
            elif kind is Return:
                result = self._pop()
                if len(stack) != act.base:
                    raise VMError(
                        f"stack discipline violated: {len(stack) - act.base} stray values on return"
                    )
                self.calls.pop()
                if act.thunk is not None:
                    act.thunk.cache = result
                stack.append(result)
            elif kind is GetField:
                receiver = act.receiver
                if instr.field != "frame" or not isinstance(receiver, (ClosureObj, ThunkObj)):
                    raise TypeMismatch(f"no field {instr.field!r} on {type(receiver).__name__}")
                stack.append(FrameRef(receiver.frame))
            elif kind is Astore1:
                ref = self._pop()
                if not isinstance(ref, FrameRef):
                    raise TypeMismatch("astore_1 expects a frame")
                act.frame = ref.frame
            elif kind is Aload0:
                stack.append(act.receiver)
            elif kind is GetStatic:
                stack.append(self.get_static(instr.package, instr.name))
            else:
                raise VMError(f"unknown instruction {instr!r}")
        return self.stack.pop()

    def _initialise(self, signature: str) -> None:
        if signature != INIT:
            raise VMError(f"unknown constructor {signature}")
        ref = self._pop()
        blank = self._pop()
        if not isinstance(ref, FrameRef) or not isinstance(blank, Uninitialized):
            raise TypeMismatch("<init> expects an uninitialised object and a frame")
        cls = blank.table[blank.index]
        if isinstance(cls, VMClosure):
            obj: Any = ClosureObj(blank.table, blank.index, ref.frame)
        else:
            obj = ThunkObj(blank.table, blank.index, ref.frame)
        # the Dup'd reference below is the same object, now initialised
        stack = self.stack
        for i in range(len(stack) - 1, self.calls[-1].base - 1, -1):
            if stack[i] is blank:
                stack[i] = obj

    def _invoke(self, signature: str) -> None:
        stack = self.stack
        if signature == FORCE:
            thunk = self._pop()
            if not isinstance(thunk, ThunkObj):
                raise TypeMismatch(f"force on {_kind(thunk)}")
            if thunk.cache is not None:
                stack.append(thunk.cache)
                return
            cls = thunk.table[thunk.index]
            self._push(Activation(thunk, EMPTY_FRAME, cls.code, thunk.table, len(stack), thunk=thunk))
        elif signature == APPLY:
            argument = self._pop()
            closure = self._pop()
            if not isinstance(closure, ClosureObj):
                raise TypeMismatch(f"apply on {_kind(closure)}")
            if not isinstance(argument, ThunkObj):
                raise TypeMismatch(f"apply with {_kind(argument)} argument")
            cls = closure.table[closure.index]
            frame = Frame(argument, closure.frame)
            self._push(Activation(closure, frame, cls.code, closure.table, len(stack)))
        elif signature == LOCAL:
            index = self._pop()
            ref = self._pop()
            if not isinstance(index, IntCell) or not isinstance(ref, FrameRef):
                raise TypeMismatch("local(I) expects a frame and an index")
            try:
                if ref.frame is None:
                    raise IndexError(index.n)
                stack.append(ref.frame.slot(index.n))
            except IndexError:
                raise VMError(f"frame slot {index.n} out of range") from None
        else:
            raise VMError(f"unknown method {signature}")


def _kind(value) -> str:
    if isinstance(value, IntCell):
        return "an integer"
    return type(value).__name__


def constant_thunk(n: int) -> ThunkObj:
    """A thunk object whose code pushes ``n``."""
    code = (*_THUNK_PROLOGUE, Bipush(n), Return())
    return ThunkObj(ClassTable([VMThunk(0, code)], f"<const {n}>"), 0, EMPTY_FRAME)


def execute(term, fuel: Fuel | int | None = None, globals: GlobalResolver | None = None):
    """Compile a closed term, run it, and return ``(value, vm)``."""
    code, classes = compile_program(term)
    vm = TargetVM(fuel, globals)
    return vm.run(code, ClassTable(classes)), vm


# -- differential check against the reference interpreter ------------------

def check_vm_consistency(term, fuel: int = 10**4, probe_depth: int = 3, probes=(0, 1), *,
                         reference_globals=None, vm_globals=None, entry=None):
    """Compare ``ebg_eval`` with compile + ``trans3`` + execution.

    Integers compare by value, closures by applying both sides to the same
    integer thunks, and a runtime type error on the VM matches the
    interpreter's error value.  For terms with globals, ``vm_globals`` is a
    factory giving each fresh VM its ``GetStatic`` resolver and ``entry``
    runs the term on a VM.
    """
    from .translate import Agree, BothDiverge, Disagree

    try:
        reference: Any = ebg_eval(term, _NO_ENV, fuel, reference_globals)
    except FuelExhausted:
        reference = _DIVERGED

    def fresh_vm():
        return TargetVM(fuel, vm_globals() if vm_globals else None)

    vm = fresh_vm()
    if entry is None:
        code, classes = compile_program(term)
        result = _guard(lambda: vm.run(code, ClassTable(classes)))
    else:
        result = _guard(lambda: entry(vm))
    problem = _compare_vm(reference, result, fresh_vm, reference_globals, fuel,
                          probe_depth, probes, "")
    if problem:
        return Disagree(problem)
    return BothDiverge() if reference is _DIVERGED else Agree(reference)


_DIVERGED = object()


def _guard(thunk):
    try:
        return thunk()
    except FuelExhausted:
        return _DIVERGED
    except (TypeMismatch, Unresolved) as exc:
        return Error(str(exc))


def _compare_vm(ref, res, fresh_vm, ref_globals, fuel, depth, probes, path):
    where = f" at {path}" if path else ""
    if ref is _DIVERGED or res is _DIVERGED:
        return None if ref is res else f"only one side ran out of fuel{where}"
    if isinstance(ref, IntVal) or isinstance(res, IntCell):
        ok = isinstance(ref, IntVal) and isinstance(res, IntCell) and ref.n == res.n
        return None if ok else f"{ref!r} != {res!r}{where}"
    if isinstance(ref, Error) or isinstance(res, Error):
        ok = isinstance(ref, Error) and isinstance(res, Error)
        return None if ok else f"{ref!r} != {res!r}{where}"
    if not (isinstance(ref, Closure) and isinstance(res, ClosureObj)):
        return f"{ref!r} != {res!r}{where}"
    if depth == 0:
        return None
    for p in probes:
        env = Pair(ref.env, Bind(ref.param, Thunk(_NO_ENV, IntLit(p))))
        try:
            ref_p: Any = ebg_eval(ref.body, env, fuel, ref_globals)
        except FuelExhausted:
            ref_p = _DIVERGED
        probe_vm = fresh_vm()
        res_p = _guard(lambda: probe_vm.apply(res, constant_thunk(p)))
        problem = _compare_vm(ref_p, res_p, fresh_vm, ref_globals, fuel, depth - 1, probes,
                              f"{path}({p})")
        if problem:
            return problem
    return None
