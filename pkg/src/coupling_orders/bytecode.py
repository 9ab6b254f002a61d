"""Static call-site extraction from compiled JVM class files.

Only the parts of the class-file format needed to find invoke
instructions are decoded: the constant pool, the method table and each
method's ``Code`` attribute. Everything else is skipped by length.

References
----------
* https://docs.oracle.com/javase/specs/jvms/se21/html/jvms-4.html
* https://docs.oracle.com/javase/specs/jvms/se21/html/jvms-6.html
"""

from __future__ import annotations

import logging
import os
import struct
import zipfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import ClassFormatError, UnsupportedClassVersionError
from .model import (
    ALL_IN_SCOPE, AnalysisFilter, Granularity, GraphBuilder, InnerClassMode,
    WeightedDependencyGraph, class_identity,
)

log = logging.getLogger(__name__)

__all__ = [
    "ClassFacts", "parse_class_file", "extract_static_graph",
    "iter_class_files", "DEFAULT_MAX_MAJOR",
]

CLASS_MAGIC = 0xCAFEBABE

# Java 25 is major 69; leave headroom for one release.
DEFAULT_MAX_MAJOR = 70

# constant pool tags
CONSTANT_Utf8 = 1
CONSTANT_Integer = 3
CONSTANT_Float = 4
CONSTANT_Long = 5
CONSTANT_Double = 6
CONSTANT_Class = 7
CONSTANT_String = 8
CONSTANT_Fieldref = 9
CONSTANT_Methodref = 10
CONSTANT_InterfaceMethodref = 11
CONSTANT_NameAndType = 12
CONSTANT_MethodHandle = 15
CONSTANT_MethodType = 16
CONSTANT_Dynamic = 17
CONSTANT_InvokeDynamic = 18
CONSTANT_Module = 19
CONSTANT_Package = 20

# payload size after the tag byte, for fixed-size entries
_CONST_SIZES = {
    CONSTANT_Integer: 4, CONSTANT_Float: 4, CONSTANT_Long: 8, CONSTANT_Double: 8,
    CONSTANT_Class: 2, CONSTANT_String: 2, CONSTANT_Fieldref: 4,
    CONSTANT_Methodref: 4, CONSTANT_InterfaceMethodref: 4, CONSTANT_NameAndType: 4,
    CONSTANT_MethodHandle: 3, CONSTANT_MethodType: 2, CONSTANT_Dynamic: 4,
    CONSTANT_InvokeDynamic: 4, CONSTANT_Module: 2, CONSTANT_Package: 2,
}

INVOKEVIRTUAL = 0xB6
INVOKESPECIAL = 0xB7
INVOKESTATIC = 0xB8
INVOKEINTERFACE = 0xB9
INVOKEDYNAMIC = 0xBA
TABLESWITCH = 0xAA
LOOKUPSWITCH = 0xAB
WIDE = 0xC4
IINC = 0x84

_METHOD_INVOKES = frozenset((INVOKEVIRTUAL, INVOKESPECIAL, INVOKESTATIC, INVOKEINTERFACE))


def _opcode_lengths() -> list[int]:
    # total instruction length including the opcode; 0 marks variable
    # length (switches, wide) and -1 an opcode the JVM does not define.
    lengths = [-1] * 256
    for op in range(0x00, 0xCA + 1):
        lengths[op] = 1
    lengths[0xFE] = lengths[0xFF] = 1  # impdep1/2
    for op in (0x10, 0x12, 0xA9, 0xBC):  # bipush ldc ret newarray
        lengths[op] = 2
    for op in range(0x15, 0x19 + 1):  # xload
        lengths[op] = 2
    for op in range(0x36, 0x3A + 1):  # xstore
        lengths[op] = 2
    for op in (0x11, 0x13, 0x14, IINC, 0xBB, 0xBD, 0xC0, 0xC1, 0xC6, 0xC7):
        lengths[op] = 3
    for op in range(0x99, 0xA8 + 1):  # if*, goto, jsr
        lengths[op] = 3
    for op in range(0xB2, 0xB8 + 1):  # field access, invokevirtual/special/static
        lengths[op] = 3
    lengths[INVOKEINTERFACE] = lengths[INVOKEDYNAMIC] = 5
    lengths[0xC5] = 4  # multianewarray
    lengths[0xC8] = lengths[0xC9] = 5  # goto_w jsr_w
    lengths[TABLESWITCH] = lengths[LOOKUPSWITCH] = lengths[WIDE] = 0
    return lengths


_OPCODE_LENGTHS = _opcode_lengths()


@dataclass(frozen=True)
class ClassFacts:
    """Call sites found in one class, keyed by callee class."""

    class_name: str
    calls: Mapping[str, int] = field(default_factory=dict)
    major_version: int = 0
    skipped_self: int = 0
    skipped_array: int = 0
    skipped_indy: int = 0

    @property
    def call_sites(self) -> int:
        return sum(self.calls.values())


class _Reader:
    __slots__ = ("data", "pos", "source")

    def __init__(self, data: bytes, source=None):
        self.data = data
        self.pos = 0
        self.source = source

    def need(self, n: int, what: str):
        if self.pos + n > len(self.data):
            raise ClassFormatError(f"truncated class file while reading {what}",
                                   offset=self.pos, source=self.source)

    def u1(self, what="u1") -> int:
        self.need(1, what)
        v = self.data[self.pos]
        self.pos += 1
        return v

    def u2(self, what="u2") -> int:
        self.need(2, what)
        (v,) = struct.unpack_from(">H", self.data, self.pos)
        self.pos += 2
        return v

    def u4(self, what="u4") -> int:
        self.need(4, what)
        (v,) = struct.unpack_from(">I", self.data, self.pos)
        self.pos += 4
        return v

    def skip(self, n: int, what: str):
        self.need(n, what)
        self.pos += n

    def take(self, n: int, what: str) -> bytes:
        self.need(n, what)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def _decode_utf8(raw: bytes) -> str:
    # Modified UTF-8: NUL is 0xC0 0x80 and supplementary characters are
    # surrogate pairs encoded one half at a time.
    raw = raw.replace(b"\xc0\x80", b"\x00")
    try:
        return raw.decode("utf-8", errors="surrogatepass")
    except UnicodeDecodeError:
        return raw.decode("utf-8", errors="replace")


class _ConstantPool:
    """Just enough of the pool to resolve method-ref owners."""

    def __init__(self, reader: _Reader):
        count = reader.u2("constant_pool_count")
        self.tags = [0] * count
        self.utf8: dict[int, str] = {}
        self.class_name_idx: dict[int, int] = {}
        self.ref_class_idx: dict[int, int] = {}
        i = 1
        while i < count:
            start = reader.pos
            tag = reader.u1("constant pool tag")
            self.tags[i] = tag
            if tag == CONSTANT_Utf8:
                length = reader.u2("utf8 length")
                self.utf8[i] = _decode_utf8(reader.take(length, "utf8 bytes"))
            elif tag in _CONST_SIZES:
                size = _CONST_SIZES[tag]
                reader.need(size, f"constant #{i}")
                if tag == CONSTANT_Class:
                    self.class_name_idx[i] = reader.u2()
                elif tag in (CONSTANT_Methodref, CONSTANT_InterfaceMethodref, CONSTANT_Fieldref):
                    self.ref_class_idx[i] = reader.u2()
                    reader.u2()
                else:
                    reader.skip(size, f"constant #{i}")
            else:
                raise ClassFormatError(f"unknown constant pool tag {tag} at index {i}",
                                       offset=start, source=reader.source)
            # 8-byte constants take two pool slots
            i += 2 if tag in (CONSTANT_Long, CONSTANT_Double) else 1
        self.source = reader.source

    def _fail(self, msg):
        raise ClassFormatError(msg, source=self.source)

    def class_name(self, index: int) -> str:
        if index not in self.class_name_idx:
            self._fail(f"constant #{index} is not a CONSTANT_Class")
        name_idx = self.class_name_idx[index]
        if name_idx not in self.utf8:
            self._fail(f"CONSTANT_Class #{index} does not point at a CONSTANT_Utf8")
        return self.utf8[name_idx]

    def method_owner(self, index: int) -> str:
        if not 0 < index < len(self.tags) or self.tags[index] not in (
                CONSTANT_Methodref, CONSTANT_InterfaceMethodref):
            self._fail(f"invoke operand #{index} is not a method reference")
        return self.class_name(self.ref_class_idx[index])


def _internal_to_dotted(name: str) -> str:
    return name.replace("/", ".")


def _skip_attributes(r: _Reader, what: str):
    for _ in range(r.u2(f"{what} attributes_count")):
        r.u2("attribute_name_index")
        r.skip(r.u4("attribute_length"), f"{what} attribute body")


def _scan_code(code: bytes, code_offset: int, pool: _ConstantPool, source) -> Iterator[tuple[int, int]]:
    """Yield ``(opcode, pool_index)`` for each invoke instruction in ``code``."""
    pc = 0
    end = len(code)
    lengths = _OPCODE_LENGTHS
    while pc < end:
        op = code[pc]
        size = lengths[op]
        if size > 0:
            if pc + size > end:
                raise ClassFormatError(f"instruction 0x{op:02x} runs past end of code",
                                       offset=code_offset + pc, source=source)
            if op >= INVOKEVIRTUAL and op <= INVOKEDYNAMIC:
                yield op, (code[pc + 1] << 8) | code[pc + 2]
            pc += size
        elif size == 0:
            if op == WIDE:
                if pc + 1 >= end:
                    raise ClassFormatError("truncated wide instruction",
                                           offset=code_offset + pc, source=source)
                pc += 6 if code[pc + 1] == IINC else 4
            else:
                base = pc
                pc = (pc + 4) & ~3  # operands are 4-byte aligned from code start
                if pc + 8 > end:
                    raise ClassFormatError("truncated switch instruction",
                                           offset=code_offset + base, source=source)
                if op == TABLESWITCH:
                    low, high = struct.unpack_from(">ii", code, pc + 4)
                    if high < low:
                        raise ClassFormatError("tableswitch with high < low",
                                               offset=code_offset + base, source=source)
                    pc += 12 + 4 * (high - low + 1)
                else:
                    (npairs,) = struct.unpack_from(">i", code, pc + 4)
                    if npairs < 0:
                        raise ClassFormatError("lookupswitch with negative npairs",
                                               offset=code_offset + base, source=source)
                    pc += 8 + 8 * npairs
                if pc > end:
                    raise ClassFormatError("switch table runs past end of code",
                                           offset=code_offset + base, source=source)
        else:
            raise ClassFormatError(f"undefined opcode 0x{op:02x}",
                                   offset=code_offset + pc, source=source)


def parse_class_file(data: bytes, *, max_major: int = DEFAULT_MAX_MAJOR,
                     source: str | None = None) -> ClassFacts:
    """Count call sites per callee class in one class file.

    Every invokevirtual, invokespecial, invokestatic and invokeinterface
    adds one to the class named by its method reference. Calls to the
    declaring class itself, calls on array types and invokedynamic are
    skipped and tallied separately.
    """
    r = _Reader(bytes(data), source)
    if len(r.data) < 4 or r.u4("magic") != CLASS_MAGIC:
        raise ClassFormatError("bad magic number, not a class file", offset=0, source=source)
    r.u2("minor_version")
    major = r.u2("major_version")
    if major > max_major:
        raise UnsupportedClassVersionError(major, max_major, source=source)
    pool = _ConstantPool(r)
    r.u2("access_flags")
    this_internal = pool.class_name(r.u2("this_class"))
    this_name = _internal_to_dotted(this_internal)
    r.u2("super_class")
    r.skip(2 * r.u2("interfaces_count"), "interfaces")
    for _ in range(r.u2("fields_count")):
        r.skip(6, "field_info")
        _skip_attributes(r, "field")

    calls: Counter = Counter()
    skipped_self = skipped_array = skipped_indy = 0
    for _ in range(r.u2("methods_count")):
        r.skip(6, "method_info")
        for _ in range(r.u2("method attributes_count")):
            name_idx = r.u2("attribute_name_index")
            length = r.u4("attribute_length")
            body_start = r.pos
            r.need(length, "method attribute body")
            if pool.utf8.get(name_idx) == "Code":
                r.skip(4, "max_stack/max_locals")
                code_length = r.u4("code_length")
                code_start = r.pos
                code = r.take(code_length, "bytecode")
                for op, idx in _scan_code(code, code_start, pool, source):
                    if op == INVOKEDYNAMIC:
                        skipped_indy += 1
                        continue
                    owner = pool.method_owner(idx)
                    if owner.startswith("["):
                        skipped_array += 1
                    elif owner == this_internal:
                        skipped_self += 1
                    else:
                        calls[_internal_to_dotted(owner)] += 1
            r.pos = body_start + length
    _skip_attributes(r, "class")
    return ClassFacts(this_name, dict(calls), major, skipped_self, skipped_array, skipped_indy)


# -- inputs -----------------------------------------------------------------

def iter_class_files(paths: Iterable[str | os.PathLike]) -> Iterator[tuple[str, bytes]]:
    """Yield ``(origin, bytes)`` for every class file under ``paths``.

    Paths may be ``.class`` files, ``.jar``/``.zip`` archives or
    directories (searched recursively). Archives nested inside archives
    are not opened.
    """
    for p in paths:
        path = Path(p)
        if not path.exists():
            raise FileNotFoundError(f"no such file or directory: {path}")
        if path.is_dir():
            for sub in sorted(path.rglob("*")):
                if sub.is_file() and sub.suffix in (".class", ".jar", ".zip"):
                    yield from iter_class_files([sub])
        elif path.suffix == ".class":
            yield str(path), path.read_bytes()
        elif zipfile.is_zipfile(path):
            yield from _iter_archive(path)
        else:
            log.warning("skipping %s: neither a class file nor an archive", path)


def _iter_archive(path: Path) -> Iterator[tuple[str, bytes]]:
    try:
        with zipfile.ZipFile(path) as zf:
            for info in sorted(zf.infolist(), key=lambda i: i.filename):
                if info.is_dir() or not info.filename.endswith(".class"):
                    continue
                # multi-release and module descriptors do not name classes of their own
                if info.filename.startswith("META-INF/") or info.filename.endswith("module-info.class"):
                    continue
                yield f"{path}!{info.filename}", zf.read(info)
    except zipfile.BadZipFile as exc:
        raise ClassFormatError(f"bad archive: {exc}", source=str(path)) from None


def extract_static_graph(class_files: Iterable[bytes | tuple[str, bytes]],
                         filter: AnalysisFilter = ALL_IN_SCOPE, *,
                         inner_class_mode: InnerClassMode = InnerClassMode.KEEP_DISTINCT,
                         max_major: int = DEFAULT_MAX_MAJOR) -> WeightedDependencyGraph:
    """Merge per-class call facts into a class-level graph.

    Items are raw bytes or ``(origin, bytes)`` pairs; ``origin`` is used to
    name the file in parse errors. Edges are kept only when both endpoints
    pass ``filter``; every parsed in-scope class becomes a node.
    """
    builder = GraphBuilder(Granularity.CLASS)
    for i, item in enumerate(class_files):
        if isinstance(item, tuple):
            origin, data = item
        else:
            origin, data = f"<input {i}>", item
        facts = parse_class_file(data, max_major=max_major, source=origin)
        caller = class_identity(facts.class_name, inner_class_mode)
        if not filter.accepts(caller):
            continue
        builder.add_node(caller)
        for callee, count in facts.calls.items():
            callee = class_identity(callee, inner_class_mode)
            if callee != caller and filter.accepts(callee):
                builder.add(caller, callee, count)
    return builder.build()
