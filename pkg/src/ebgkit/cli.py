"""Command-line front end.

Exit codes: 0 success, 1 disagreement, 2 usage, 3 parse error,
4 runtime error, 5 fuel exhausted.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import ebgvm, lam, mujava, targetvm
from .env import EMPTY
from .fuel import DEFAULT_FUEL, Fuel, FuelExhausted, run_deep
from .lift import lift_classes
from .loader import (
    DirectoryResolver, Loader, MalformedImage, MemoryResolver,
    package_bytes, read_package, write_package,
)
from .source import (
    InlineError, SourceProgram, compile_package, image_exports, inline, read_source,
)
from .translate import Agree, BothDiverge, Disagree, TranslationError, check_consistency, trans1

EXIT_OK, EXIT_DISAGREE, EXIT_USAGE, EXIT_PARSE, EXIT_RUNTIME, EXIT_FUEL = range(6)


class RuntimeFailure(Exception):
    pass


def format_lambda(value) -> str:
    if isinstance(value, lam.IntVal):
        return str(value.n)
    if isinstance(value, lam.Closure):
        return "<closure>"
    raise RuntimeFailure(f"evaluation error: {value.reason or 'error'}")


def format_vm(value) -> str:
    if isinstance(value, targetvm.IntCell):
        return str(value.n)
    if isinstance(value, targetvm.ClosureObj):
        return "<closure>"
    raise RuntimeFailure(f"unexpected result {value!r}")


def _search_dir(args, path: Path) -> Path:
    return Path(args.path) if args.path else path.resolve().parent


def _program(args) -> SourceProgram:
    path = Path(args.file)
    return SourceProgram(read_source(path), _search_dir(args, path))


# -- subcommands -----------------------------------------------------------

def cmd_run(args) -> int:
    program = _program(args)
    root = next(iter(program.units.values()))
    term = program.term(root.package_name, args.entry)
    value = lam.ebg_eval(term, EMPTY, Fuel(args.fuel), globals=program.resolver())
    print(format_lambda(value))
    return EXIT_OK


def cmd_compile(args) -> int:
    path = Path(args.file)
    unit = read_source(path)
    image = compile_package(unit, image_exports(_search_dir(args, path)))
    out = Path(args.output) if args.output else path.with_suffix(".ebgp")
    with open(out, "wb") as sink:
        write_package(image, sink)
    return EXIT_OK


def _trace(line: str) -> None:
    print(line, file=sys.stderr)


def cmd_exec(args) -> int:
    path = Path(args.image)
    image = read_package(path.read_bytes())
    loader = Loader(DirectoryResolver(_search_dir(args, path)))
    loader.add_image(image)
    vm = targetvm.TargetVM(Fuel(args.fuel), loader.get_static, _trace if args.trace else None)
    value = vm.force(vm.get_static(image.package_name, args.entry))
    print(format_vm(value))
    return EXIT_OK


def _describe(verdict) -> str:
    if isinstance(verdict, Agree):
        value = verdict.value
        shown = {lam.IntVal: lambda v: str(v.n), lam.Closure: lambda v: "<closure>"}
        return "agree " + shown.get(type(value), lambda v: "<error>")(value)
    if isinstance(verdict, BothDiverge):
        return "both diverge"
    return f"DISAGREE: {verdict.details}"


def cmd_check(args) -> int:
    program = _program(args)
    root = next(iter(program.units.values()))
    stages = ["mujava", "vm"] if args.stage == "all" else [args.stage]
    disagreements = 0
    for name in root.names:
        for stage in stages:
            if stage == "mujava":
                try:
                    term = inline(program.term(root.package_name, name), program.term)
                except InlineError as exc:
                    print(f"{name} mujava skipped ({exc})")
                    continue
                verdict = check_consistency(term, args.fuel)
            else:
                verdict = _check_vm(program, root.package_name, name, args.fuel)
            disagreements += isinstance(verdict, Disagree)
            print(f"{name} {stage} {_describe(verdict)}")
    return EXIT_DISAGREE if disagreements else EXIT_OK


def _check_vm(program: SourceProgram, package: str, name: str, fuel: int):
    images = {
        unit.package_name: package_bytes(compile_package(unit, program.exports))
        for unit in program.units.values()
    }

    def run(vm):
        return vm.force(vm.get_static(package, name))

    def fresh_loader():
        return Loader(MemoryResolver(images)).get_static

    return targetvm.check_vm_consistency(
        program.term(package, name), fuel,
        reference_globals=program.resolver(), vm_globals=fresh_loader, entry=run,
    )


def cmd_dump_ir(args) -> int:
    program = _program(args)
    root = next(iter(program.units.values()))
    term = program.term(root.package_name, args.entry)
    stage = args.stage
    if stage == "ast":
        print(lam.show(term))
    elif stage == "ebgvm":
        print(ebgvm.render(ebgvm.compile_term(term)))
    elif stage == "target":
        code, classes = targetvm.maptrans3(ebgvm.compile_term(term), [])
        print(targetvm.render_program(code, classes))
    else:
        closed = inline(term, program.term)
        translated = trans1(closed)
        if stage == "mujava":
            print(mujava.show(translated))
        else:
            lifted = lift_classes(translated)
            print(f"main = {mujava.show(lifted.main)}")
            for cls in lifted.classes:
                header = f"apply({cls.param})" if cls.kind == "closure" else "value()"
                print(f"\n{cls.kind} {cls.label} {header} =\n  {mujava.show(cls.body)}")
    return EXIT_OK


# -- driver ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fuel", type=int, default=DEFAULT_FUEL, help="step budget (default 10^6)")
    common.add_argument("--trace", action="store_true", help="print each VM instruction to stderr")
    common.add_argument("--path", help="directory holding imported packages")
    common.add_argument("--def", dest="entry", default="main", help="definition to use (default main)")

    parser = argparse.ArgumentParser(prog="ebgkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="evaluate main with the reference interpreter")
    p.add_argument("file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compile", parents=[common], help="compile a package source to an image")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("exec", parents=[common], help="force main of a package image on the VM")
    p.add_argument("image")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("check", parents=[common], help="compare pipeline stages with the interpreter")
    p.add_argument("file")
    p.add_argument("--stage", choices=["mujava", "vm", "all"], default="all")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("dump-ir", parents=[common], help="print an intermediate representation")
    p.add_argument("file")
    p.add_argument("--stage", choices=["ast", "mujava", "lifted", "ebgvm", "target"], required=True)
    p.set_defaults(func=cmd_dump_ir)
    return parser


def _dispatch(args) -> int:
    try:
        return args.func(args)
    except lam.ParseError as exc:
        print(f"{getattr(args, 'file', '')}:{exc}", file=sys.stderr)
        return EXIT_PARSE
    except FuelExhausted as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FUEL
    except (RuntimeFailure, targetvm.VMError, MalformedImage, ebgvm.CompileError,
            TranslationError, InlineError, KeyError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return EXIT_RUNTIME


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return run_deep(_dispatch, args)


if __name__ == "__main__":
    sys.exit(main())
