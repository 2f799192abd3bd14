"""Shared generators and oracles for the test suite."""

from __future__ import annotations

import functools

import pytest

from ebgkit.fuel import run_deep
from ebgkit.lam import App, IntLit, Lam, Var

LITERALS = (0, 1)


@functools.lru_cache(maxsize=None)
def _terms(size: int, depth: int) -> tuple:
    """Terms of exactly ``size`` nodes whose free variables are among v0..v{depth-1}."""
    if size < 1:
        return ()
    out = []
    if size == 1:
        out.extend(IntLit(n) for n in LITERALS)
        out.extend(Var(f"v{i}") for i in range(depth))
        return tuple(out)
    out.extend(Lam(f"v{depth}", body) for body in _terms(size - 1, depth + 1))
    for left in range(1, size - 1):
        for fun in _terms(left, depth):
            for arg in _terms(size - 1 - left, depth):
                out.append(App(fun, arg))
    return tuple(out)


def closed_terms(max_size: int):
    """Every closed term up to ``max_size`` nodes over the literals 0 and 1."""
    for n in range(1, max_size + 1):
        yield from _terms(n, 0)


def deep(fn, *args, **kwargs):
    """Run ``fn`` on a thread with room for deep Python recursion."""
    return run_deep(fn, *args, **kwargs)


@pytest.fixture
def on_deep_stack():
    return deep


# -- generated muJava classes ------------------------------------------------

from hypothesis import strategies as st  # noqa: E402

from ebgkit.env import EMPTY, from_pairs  # noqa: E402
from ebgkit.mujava import NULL_CLASS, ClassVal, JInt, Method0Def, Method1Def  # noqa: E402

METHOD_NAMES = ("f", "g", "h", "k")


def _method_def(tag: int):
    # the literal tags each definition so shadowing is observable
    return st.sampled_from([Method0Def(JInt(tag)), Method1Def("p", JInt(tag))])


@st.composite
def class_chains(draw, max_depth: int = 4):
    """A ClassVal over up to ``max_depth`` levels of super classes.

    Returns ``(cls, levels)`` where ``levels`` lists, from the root super
    class down, the attribute names and ``{method: tag}`` of each level.
    """
    depth = draw(st.integers(0, max_depth))
    cls = NULL_CLASS
    levels = []
    tag = 0
    for level in range(depth):
        attrs = tuple(f"a{level}_{i}" for i in range(draw(st.integers(0, 3))))
        names = draw(st.lists(st.sampled_from(METHOD_NAMES), unique=True, max_size=3))
        methods = []
        tags = {}
        for name in names:
            tag += 1
            methods.append((name, draw(_method_def(tag))))
            tags[name] = tag
        cls = ClassVal(EMPTY, cls, attrs, from_pairs(methods))
        levels.append((attrs, tags))
    return cls, levels


# -- random closed terms with possible shadowing -----------------------------

from ebgkit.lam import App as _App, IntLit as _IntLit, Lam as _Lam, Var as _Var  # noqa: E402

BINDER_NAMES = ("x", "y", "z")


def random_closed_term(rng, budget: int, scope: tuple = ()):
    """A closed term of roughly ``budget`` nodes; binder names repeat."""
    if budget <= 1:
        if scope and rng.random() < 0.7:
            return _Var(rng.choice(scope))
        return _IntLit(rng.randint(0, 3))
    roll = rng.random()
    if roll < 0.4:
        name = rng.choice(BINDER_NAMES)
        return _Lam(name, random_closed_term(rng, budget - 1, (*scope, name)))
    left = rng.randint(1, budget - 2) if budget > 2 else 1
    return _App(
        random_closed_term(rng, left, scope),
        random_closed_term(rng, max(budget - 1 - left, 1), scope),
    )


# -- package images ----------------------------------------------------------

from ebgkit import targetvm as _tvm  # noqa: E402
from ebgkit.loader import PackageImage  # noqa: E402

_idents = st.text("abcXYZ_0é", min_size=1, max_size=6)
_signatures = st.sampled_from(sorted(_tvm.SIGNATURES))
_i32 = st.integers(-(2**31), 2**31 - 1)


def _instructions(class_count: int):
    return st.one_of(
        st.builds(_tvm.VMNew, st.integers(0, class_count - 1)),
        st.just(_tvm.Aload0()), st.just(_tvm.Aload1()), st.just(_tvm.Astore1()),
        st.builds(_tvm.Bipush, _i32),
        st.builds(_tvm.GetStatic, _idents, _idents, st.just(_tvm.THUNK_DESCRIPTOR)),
        st.just(_tvm.Return()),
        st.builds(_tvm.InvokeVirtual, _signatures),
        st.builds(_tvm.GetField, st.just("frame") | _idents),
        st.just(_tvm.Dup()),
        st.builds(_tvm.InvokeSpecial, _signatures),
    )


@st.composite
def package_images(draw):
    count = draw(st.integers(1, 6))
    classes = []
    for name in range(count):
        kind = _tvm.VMThunk if draw(st.booleans()) else _tvm.VMClosure
        code = tuple(draw(st.lists(_instructions(count), max_size=8)))
        classes.append(kind(name, code))
    thunks = [c.name for c in classes if isinstance(c, _tvm.VMThunk)]
    globals_ = {}
    if thunks:
        names = draw(st.lists(_idents, unique=True, max_size=4))
        globals_ = {n: draw(st.sampled_from(thunks)) for n in names}
    imports = draw(st.lists(_idents, unique=True, max_size=3))
    return PackageImage(draw(_idents), imports, globals_, classes)


# -- the diamond fixture: App imports Lib and Base, Lib imports Base ---------

DIAMOND = {
    "Base": "package Base;\ndef k = \\a. \\b. a;\ndef unused = 99\n",
    "Lib": "package Lib;\nimport Base;\ndef pick = \\x. k x 0;\ndef twice = \\f. \\x. f (f x)\n",
    "App": (
        "package App;\nimport Lib, Base;\n"
        "def main = twice (\\n. pick n) 7;\n"
        "def local = 3;\n"
        "def direct = Base.k 4 5\n"
    ),
}


def write_diamond(directory):
    for name, text in DIAMOND.items():
        (directory / f"{name}.ebg").write_text(text)
    return directory / "App.ebg"


def diamond_images():
    """``{package: PackageImage}`` compiled from the diamond sources."""
    from ebgkit.source import SourceProgram, compile_package, parse_source

    units = {name: parse_source(text) for name, text in DIAMOND.items()}
    program = SourceProgram(units["App"], units=units.values())
    return {name: compile_package(unit, program.exports) for name, unit in units.items()}

DIAMOND_MERGED = (
    "package Merged;\n"
    "def k = \\a. \\b. a;\n"
    "def unused = 99;\n"
    "def pick = \\x. k x 0;\n"
    "def twice = \\f. \\x. f (f x);\n"
    "def main = twice (\\n. pick n) 7\n"
)


# -- acceptance report -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda text: int(text.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
