"""Package images and the load-once class loader.

A package image holds the classes produced for every top-level definition
of one package, a table mapping each definition to the thunk class that
computes it, and the names of the packages it imports.  The loader stages
an image's classes when the package is read and defines each one only on
first use; imports are read only when something asks for them.

Binary layout (little-endian)::

    "EBGP" | version u16 | package name | import count u16, names
           | global count u16, (name, class index u32)*
           | class count u32, (kind u8, name u32, instr count u32, instrs)*

Strings are a u16 byte length followed by UTF-8.  Each instruction is one
opcode byte followed by its operands (integers as i32, strings as above).
"""

from __future__ import annotations

import io
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Callable, Optional

from .targetvm import (
    EMPTY_FRAME, Aload0, Aload1, Astore1, Bipush, ClassTable, Dup, GetField,
    GetStatic, InvokeSpecial, InvokeVirtual, Return, TargetInstr, ThunkObj,
    Unresolved, VMClosure, VMNew, VMThunk, VmClass,
)

MAGIC = b"EBGP"
FORMAT_VERSION = 1
EXTENSION = ".ebgp"

OPCODES: dict[type, int] = {
    VMNew: 0x01, Aload0: 0x02, Aload1: 0x03, Astore1: 0x04, Bipush: 0x05,
    GetStatic: 0x06, Return: 0x07, InvokeVirtual: 0x08, GetField: 0x09,
    Dup: 0x0A, InvokeSpecial: 0x0B,
}
INSTRUCTIONS = {code: cls for cls, code in OPCODES.items()}


@dataclass
class PackageImage:
    package_name: str
    import_names: list[str]
    globals: dict[str, int]
    classes: list[VmClass]
    format_version: int = FORMAT_VERSION

    def validate(self) -> None:
        if len(set(self.import_names)) != len(self.import_names):
            raise MalformedImage("importNames", "duplicate import")
        for position, cls in enumerate(self.classes):
            if cls.name != position:
                raise MalformedImage("classes", f"class at position {position} is named {cls.name}")
            for instr in cls.code:
                if isinstance(instr, VMNew) and not 0 <= instr.index < len(self.classes):
                    raise MalformedImage("classes", f"class {position} instantiates unknown class {instr.index}")
        for name, index in self.globals.items():
            if not 0 <= index < len(self.classes):
                raise MalformedImage("globals", f"{name} refers to missing class {index}")
            if not isinstance(self.classes[index], VMThunk):
                raise MalformedImage("globals", f"{name} refers to a closure class")


class MalformedImage(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"malformed package image ({field_name}): {message}")
        self.field = field_name


# -- writing ---------------------------------------------------------------

def _str(out: BinaryIO, text: str) -> None:
    data = text.encode("utf-8")
    out.write(struct.pack("<H", len(data)))
    out.write(data)


def _instr(out: BinaryIO, instr: TargetInstr) -> None:
    out.write(bytes([OPCODES[type(instr)]]))
    if isinstance(instr, VMNew):
        out.write(struct.pack("<i", instr.index))
    elif isinstance(instr, Bipush):
        out.write(struct.pack("<i", instr.n))
    elif isinstance(instr, GetStatic):
        for text in (instr.package, instr.name, instr.descriptor):
            _str(out, text)
    elif isinstance(instr, (InvokeVirtual, InvokeSpecial)):
        _str(out, instr.signature)
    elif isinstance(instr, GetField):
        _str(out, instr.field)


def write_package(image: PackageImage, sink: BinaryIO) -> None:
    image.validate()
    sink.write(MAGIC)
    sink.write(struct.pack("<H", image.format_version))
    _str(sink, image.package_name)
    sink.write(struct.pack("<H", len(image.import_names)))
    for name in image.import_names:
        _str(sink, name)
    sink.write(struct.pack("<H", len(image.globals)))
    for name, index in image.globals.items():
        _str(sink, name)
        sink.write(struct.pack("<I", index))
    sink.write(struct.pack("<I", len(image.classes)))
    for cls in image.classes:
        sink.write(struct.pack("<BII", 1 if isinstance(cls, VMThunk) else 0, cls.name, len(cls.code)))
        for instr in cls.code:
            _instr(sink, instr)


def package_bytes(image: PackageImage) -> bytes:
    buffer = io.BytesIO()
    write_package(image, buffer)
    return buffer.getvalue()


# -- reading ---------------------------------------------------------------

class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedImage(what, "truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))[0]

    def string(self, what: str) -> str:
        size = self.unpack("<H", what)
        try:
            return self.take(size, what).decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedImage(what, "invalid UTF-8") from None

    def instr(self, what: str) -> TargetInstr:
        opcode = self.unpack("<B", what)
        cls = INSTRUCTIONS.get(opcode)
        if cls is None:
            raise MalformedImage(what, f"unknown opcode {opcode:#04x}")
        if cls in (VMNew, Bipush):
            return cls(self.unpack("<i", what))
        if cls is GetStatic:
            return GetStatic(self.string(what), self.string(what), self.string(what))
        if cls in (InvokeVirtual, InvokeSpecial, GetField):
            return cls(self.string(what))
        return cls()


def read_package(source: BinaryIO | bytes) -> PackageImage:
    data = source if isinstance(source, bytes) else source.read()
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise MalformedImage("magic", "not a package image")
    version = r.unpack("<H", "version")
    if version != FORMAT_VERSION:
        raise MalformedImage("version", f"unsupported version {version}")
    name = r.string("packageName")
    imports = [r.string("importNames") for _ in range(r.unpack("<H", "importNames"))]
    globals_: dict[str, int] = {}
    for _ in range(r.unpack("<H", "globals")):
        key = r.string("globals")
        globals_[key] = r.unpack("<I", "globals")
    classes: list[VmClass] = []
    for _ in range(r.unpack("<I", "classes")):
        kind = r.unpack("<B", "classes")
        if kind not in (0, 1):
            raise MalformedImage("classes", f"unknown class kind {kind}")
        cls_name = r.unpack("<I", "classes")
        code = tuple(r.instr("classes") for _ in range(r.unpack("<I", "classes")))
        classes.append((VMThunk if kind else VMClosure)(cls_name, code))
    if r.pos != len(data):
        raise MalformedImage("trailer", f"{len(data) - r.pos} unexpected trailing bytes")
    image = PackageImage(name, imports, globals_, classes, version)
    image.validate()
    return image


# -- resolvers -------------------------------------------------------------

Resolver = Callable[[str], Optional[bytes]]


class DirectoryResolver:
    """Reads ``NAME.ebgp`` from a directory and counts reads per package."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.reads: Counter = Counter()

    def __call__(self, name: str) -> Optional[bytes]:
        path = self.root / f"{name}{EXTENSION}"
        if not path.is_file():
            return None
        self.reads[name] += 1
        return path.read_bytes()


class MemoryResolver:
    def __init__(self, images: dict[str, bytes | PackageImage]):
        self.images = {
            name: package_bytes(image) if isinstance(image, PackageImage) else image
            for name, image in images.items()
        }
        self.reads: Counter = Counter()

    def __call__(self, name: str) -> Optional[bytes]:
        if name not in self.images:
            return None
        self.reads[name] += 1
        return self.images[name]


# -- the loader ------------------------------------------------------------

@dataclass(eq=False)
class PackageClass:
    """The distinguished class of a package: its global table."""

    image: PackageImage


def class_key(package: str, index: int) -> str:
    return f"{package}${index}"


class PackageTable(ClassTable):
    """Class lookup that defines classes through the loader on first use."""

    def __init__(self, loader: "Loader", package: str):
        self.loader = loader
        self.name = package

    def __getitem__(self, index: int) -> VmClass:
        handle = self.loader.load_class(class_key(self.name, index))
        if not isinstance(handle, (VMClosure, VMThunk)):
            raise Unresolved(f"{class_key(self.name, index)} is not a code class")
        return handle


class Loader:
    """Stages package classes and defines each class at most once.

    ``class_bytes`` holds staged but undefined classes, ``loaded_classes``
    the defined ones, and ``imported_packages`` the imports not yet read.
    ``defines`` counts define events per class key; ``reads`` lists package
    reads in order.
    """

    def __init__(self, resolver: Resolver, fallback: Callable[[str], object] | None = None):
        self.resolver = resolver
        self.fallback = fallback
        self.class_bytes: dict[str, object] = {}
        self.loaded_classes: dict[str, object] = {}
        self.imported_packages: list[str] = []
        self.packages: dict[str, PackageImage] = {}
        self.reads: list[str] = []
        self.defines: Counter = Counter()
        self.statics: dict[tuple[str, str], ThunkObj] = {}

    # staging

    def add_image(self, image: PackageImage) -> None:
        """Stage every class of ``image`` and queue its unread imports."""
        if image.package_name in self.packages:
            return
        self.packages[image.package_name] = image
        self.class_bytes[image.package_name] = PackageClass(image)
        for cls in image.classes:
            self.class_bytes[class_key(image.package_name, cls.name)] = cls
        for name in image.import_names:
            if name not in self.packages and name not in self.imported_packages:
                self.imported_packages.append(name)

    def read(self, name: str) -> PackageImage:
        data = self.resolver(name)
        if data is None:
            raise Unresolved(f"package {name} not found")
        return self._stage_bytes(name, data)

    def _stage_bytes(self, name: str, data: bytes) -> PackageImage:
        self.reads.append(name)
        image = read_package(data)
        if image.package_name != name:
            raise MalformedImage("packageName", f"expected {name}, found {image.package_name}")
        self.add_image(image)
        return image

    # loading

    def load_class(self, key: str):
        if key in self.loaded_classes:
            return self.loaded_classes[key]
        if key in self.class_bytes:
            handle = self._define(key)
        elif key in self.imported_packages:
            self._read_pending(key)
            handle = self.load_class(key)
        elif key.split("$", 1)[0] in self.imported_packages:
            self._read_pending(key.split("$", 1)[0])
            handle = self.load_class(key)
        else:
            handle = self._search_pending(key)
        self.loaded_classes[key] = handle
        return handle

    def _define(self, key: str):
        handle = self.class_bytes.pop(key)
        self.defines[key] += 1
        return handle

    def _read_pending(self, name: str) -> None:
        self.imported_packages.remove(name)
        self.read(name)

    def _search_pending(self, key: str):
        package = key.split("$", 1)[0]
        if package not in self.packages:
            # reached by qualified name rather than through an import
            data = self.resolver(package)
            if data is not None:
                self._stage_bytes(package, data)
                return self.load_class(key)
        while self.imported_packages:
            self._read_pending(self.imported_packages[0])
            if key in self.class_bytes or key.split("$", 1)[0] in self.imported_packages:
                return self.load_class(key)
        if self.fallback is not None:
            handle = self.fallback(key)
            if handle is not None:
                return handle
        raise Unresolved(f"cannot resolve class {key}")

    # globals

    def get_static(self, package: str, name: str) -> ThunkObj:
        """The thunk for global ``package.name``; one instance per loader."""
        key = (package, name)
        if key not in self.statics:
            handle = self.load_class(package)
            if not isinstance(handle, PackageClass):
                raise Unresolved(f"{package} is not a package")
            index = handle.image.globals.get(name)
            if index is None:
                raise Unresolved(f"package {package} has no global {name}")
            self.statics[key] = ThunkObj(PackageTable(self, package), index, EMPTY_FRAME)
        return self.statics[key]
