"""Package sources: ``package NAME; import A, B; def name = term; ...``

A definition may refer to its own package's definitions and to those of its
imports by bare name, or to any package by ``Package.name``.  Bare names
resolve innermost first: lambda binders, then the package's own
definitions, then imports with later imports shadowing earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from . import ebgvm
from .env import EMPTY, Bind, Environment, Pair, lookup
from .lam import App, Global, Lam, LambdaTerm, ParseError, TermParser, Var, tokenize
from .loader import EXTENSION, PackageImage, read_package
from .targetvm import VMNew, maptrans3

SOURCE_EXTENSION = ".ebg"


@dataclass
class SourceUnit:
    package_name: str
    import_names: list[str]
    definitions: list[tuple[str, LambdaTerm]] = field(default_factory=list)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.definitions]

    def definition(self, name: str) -> LambdaTerm:
        for key, term in self.definitions:
            if key == name:
                return term
        raise KeyError(f"{self.package_name} has no definition {name!r}")


def parse_source(text: str, default_name: str = "Main") -> SourceUnit:
    tokens = tokenize(text)
    p = TermParser(tokens)
    name = default_name
    if p.tok.kind == "ident" and p.tok.text == "package":
        p.advance()
        name = p.expect("ident").text
        p.expect(";")
    imports: list[str] = []
    while p.tok.kind == "ident" and p.tok.text == "import":
        p.advance()
        imports.append(p.expect("ident").text)
        while p.tok.kind == ",":
            p.advance()
            imports.append(p.expect("ident").text)
        p.expect(";")
    unit = SourceUnit(name, imports)
    seen: set[str] = set()
    while p.tok.kind != "eof":
        tok = p.tok
        if not (tok.kind == "ident" and tok.text == "def"):
            raise ParseError(f"expected 'def', found {tok.text!r}", tok.line, tok.col)
        p.advance()
        def_tok = p.expect("ident")
        if def_tok.text in seen:
            raise ParseError(f"duplicate definition {def_tok.text!r}", def_tok.line, def_tok.col)
        seen.add(def_tok.text)
        p.expect("=")
        unit.definitions.append((def_tok.text, p.term()))
        if p.tok.kind != "eof":
            p.expect(";")
    if len(set(imports)) != len(imports):
        raise ParseError("duplicate import", 1, 1)
    return unit


def read_source(path: str | Path) -> SourceUnit:
    path = Path(path)
    return parse_source(path.read_text(encoding="utf-8"), default_name=path.stem)


# -- name resolution -------------------------------------------------------

def globals_env(unit: SourceUnit, exports: Callable[[str], list[str]]) -> Environment:
    """name -> package for everything visible at the top of ``unit``."""
    env: Environment = EMPTY
    for package in [*unit.import_names, unit.package_name]:
        names = unit.names if package == unit.package_name else exports(package)
        for name in names:
            env = Pair(env, Bind(name, package))
    return env


def resolve(term: LambdaTerm, globals: Environment, bound: frozenset = frozenset()) -> LambdaTerm:
    """Turn free variables that name globals into ``Global`` references."""
    if isinstance(term, Var) and term.name not in bound:
        package = lookup(term.name, globals, "")
        return Global(package, term.name) if package else term
    if isinstance(term, Lam):
        return Lam(term.param, resolve(term.body, globals, bound | {term.param}))
    if isinstance(term, App):
        return App(resolve(term.fun, globals, bound), resolve(term.arg, globals, bound))
    return term


class InlineError(ValueError):
    pass


def inline(term: LambdaTerm, lookup_global: Callable[[str, str], LambdaTerm],
           active: tuple = ()) -> LambdaTerm:
    """Substitute every ``Global`` by its (closed) definition.

    Raises :class:`InlineError` on recursive globals, which have no finite
    inlining.
    """
    if isinstance(term, Global):
        key = (term.package, term.name)
        if key in active:
            raise InlineError(f"recursive global {term.package}.{term.name}")
        return inline(lookup_global(*key), lookup_global, (*active, key))
    if isinstance(term, Lam):
        return Lam(term.param, inline(term.body, lookup_global, active))
    if isinstance(term, App):
        return App(inline(term.fun, lookup_global, active), inline(term.arg, lookup_global, active))
    return term


# -- whole programs --------------------------------------------------------

class SourceProgram:
    """A root package plus every package it reaches, loaded from sources.

    Imports are taken from ``units`` when given there, else read from
    ``search``.
    """

    def __init__(self, root: SourceUnit, search: Path | None = None,
                 units: Iterable[SourceUnit] = ()):
        self.search = search
        self.units: dict[str, SourceUnit] = {}
        self._known = {unit.package_name: unit for unit in units}
        self._resolved: dict[tuple[str, str], LambdaTerm] = {}
        self._add(root)

    def _add(self, unit: SourceUnit) -> None:
        self.units[unit.package_name] = unit
        for name in unit.import_names:
            self.unit(name)

    def unit(self, name: str) -> SourceUnit:
        if name not in self.units and name in self._known:
            self._add(self._known[name])
        if name not in self.units:
            if self.search is None:
                raise KeyError(f"package {name} not found")
            path = self.search / f"{name}{SOURCE_EXTENSION}"
            if not path.is_file():
                raise KeyError(f"package {name} not found in {self.search}")
            self._add(read_source(path))
        return self.units[name]

    def exports(self, package: str) -> list[str]:
        return self.unit(package).names

    def term(self, package: str, name: str) -> LambdaTerm:
        """The definition with every global reference resolved."""
        key = (package, name)
        if key not in self._resolved:
            unit = self.unit(package)
            env = globals_env(unit, self.exports)
            self._resolved[key] = resolve(unit.definition(name), env)
        return self._resolved[key]

    def resolver(self):
        """A global resolver suitable for :func:`~ebgkit.lam.ebg_eval`."""

        def resolve_global(package: str, name: str) -> Optional[LambdaTerm]:
            try:
                return self.term(package, name)
            except KeyError:
                return None

        return resolve_global


def compile_package(unit: SourceUnit, exports: Callable[[str], list[str]]) -> PackageImage:
    """Compile every definition to a thunk class and collect the image."""
    env = globals_env(unit, exports)
    classes: list = []
    table: dict[str, int] = {}
    for name, term in unit.definitions:
        instrs = ebgvm.compile_term(term, [], env)
        code, classes = maptrans3([ebgvm.Delay(tuple(instrs))], classes)
        assert isinstance(code[0], VMNew)
        table[name] = code[0].index
    return PackageImage(unit.package_name, list(unit.import_names), table, classes)


def image_exports(search: Path) -> Callable[[str], list[str]]:
    """Export lists from compiled images in ``search``, else from sources."""

    def exports(package: str) -> list[str]:
        image_path = search / f"{package}{EXTENSION}"
        if image_path.is_file():
            return list(read_package(image_path.read_bytes()).globals)
        source_path = search / f"{package}{SOURCE_EXTENSION}"
        if source_path.is_file():
            return read_source(source_path).names
        raise KeyError(f"package {package} not found in {search}")

    return exports
