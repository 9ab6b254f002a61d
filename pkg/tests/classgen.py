"""Minimal class-file assembler for building bytecode fixtures by hand.

Only produces what the fixtures need: a constant pool, methods with Code
attributes, and an optional BootstrapMethods attribute. The output is
structurally valid per the class-file format, not verifier-clean.
"""

import struct


def u1(v):
    return struct.pack(">B", v)


def u2(v):
    return struct.pack(">H", v)


def u4(v):
    return struct.pack(">I", v)


def i4(v):
    return struct.pack(">i", v)


ACC_PUBLIC = 0x0001
ACC_STATIC = 0x0008
ACC_SUPER = 0x0020
ACC_INTERFACE = 0x0200
ACC_ABSTRACT = 0x0400


class ClassBuilder:
    def __init__(self, name, super_name="java/lang/Object", major=52, access=ACC_PUBLIC | ACC_SUPER):
        self.entries = [None]  # index 0 unused
        self._index = {}
        self.name = name
        self.major = major
        self.access = access
        self.this_idx = self.cls(name)
        self.super_idx = self.cls(super_name) if super_name else 0
        self.methods = []
        self.bootstrap = []

    def _add(self, key, payload, slots=1):
        if key in self._index:
            return self._index[key]
        idx = len(self.entries)
        self.entries.append(payload)
        if slots == 2:
            self.entries.append(None)
        self._index[key] = idx
        return idx

    def utf8(self, s):
        raw = s.encode("utf-8")
        return self._add(("utf8", s), u1(1) + u2(len(raw)) + raw)

    def cls(self, name):
        n = self.utf8(name)
        return self._add(("class", name), u1(7) + u2(n))

    def string(self, s):
        return self._add(("string", s), u1(8) + u2(self.utf8(s)))

    def integer(self, v):
        return self._add(("int", v), u1(3) + i4(v))

    def float_(self, v):
        return self._add(("float", v), u1(4) + struct.pack(">f", v))

    def long(self, v):
        return self._add(("long", v), u1(5) + struct.pack(">q", v), slots=2)

    def double(self, v):
        return self._add(("double", v), u1(6) + struct.pack(">d", v), slots=2)

    def nat(self, name, desc):
        return self._add(("nat", name, desc), u1(12) + u2(self.utf8(name)) + u2(self.utf8(desc)))

    def fieldref(self, owner, name, desc):
        return self._add(("field", owner, name, desc),
                         u1(9) + u2(self.cls(owner)) + u2(self.nat(name, desc)))

    def methodref(self, owner, name, desc="()V"):
        return self._add(("method", owner, name, desc),
                         u1(10) + u2(self.cls(owner)) + u2(self.nat(name, desc)))

    def imethodref(self, owner, name, desc="()V"):
        return self._add(("imethod", owner, name, desc),
                         u1(11) + u2(self.cls(owner)) + u2(self.nat(name, desc)))

    def method_handle(self, kind, ref):
        return self._add(("mh", kind, ref), u1(15) + u1(kind) + u2(ref))

    def method_type(self, desc):
        return self._add(("mt", desc), u1(16) + u2(self.utf8(desc)))

    def indy(self, name, desc):
        if not self.bootstrap:
            mf = self.methodref(
                "java/lang/invoke/LambdaMetafactory", "metafactory",
                "(Ljava/lang/invoke/MethodHandles$Lookup;Ljava/lang/String;"
                "Ljava/lang/invoke/MethodType;Ljava/lang/invoke/MethodType;"
                "Ljava/lang/invoke/MethodHandle;Ljava/lang/invoke/MethodType;)"
                "Ljava/lang/invoke/CallSite;")
            self.bootstrap.append((self.method_handle(6, mf), [self.method_type("()V")]))
        return self._add(("indy", name, desc), u1(18) + u2(0) + u2(self.nat(name, desc)))

    def method(self, name, desc="()V", code=None, access=ACC_PUBLIC, max_stack=4, max_locals=4):
        self.methods.append((access, self.utf8(name), self.utf8(desc), code, max_stack, max_locals))
        if code is not None:
            self.utf8("Code")

    def to_bytes(self):
        if self.bootstrap:
            self.utf8("BootstrapMethods")
        body = bytearray()
        body += u2(self.access) + u2(self.this_idx) + u2(self.super_idx)
        body += u2(0)  # interfaces
        body += u2(0)  # fields
        body += u2(len(self.methods))
        for access, name_idx, desc_idx, code, max_stack, max_locals in self.methods:
            body += u2(access) + u2(name_idx) + u2(desc_idx)
            if code is None:
                body += u2(0)
                continue
            code = bytes(code)
            attr = u2(max_stack) + u2(max_locals) + u4(len(code)) + code + u2(0) + u2(0)
            body += u2(1) + u2(self._index[("utf8", "Code")]) + u4(len(attr)) + attr
        if self.bootstrap:
            bsm = bytearray(u2(len(self.bootstrap)))
            for mh, args in self.bootstrap:
                bsm += u2(mh) + u2(len(args)) + b"".join(u2(a) for a in args)
            body += u2(1) + u2(self._index[("utf8", "BootstrapMethods")]) + u4(len(bsm)) + bsm
        else:
            body += u2(0)
        pool = b"".join(e for e in self.entries[1:] if e is not None)
        header = u4(0xCAFEBABE) + u2(0) + u2(self.major) + u2(len(self.entries))
        return bytes(header + pool + body)


# -- instruction helpers ---------------------------------------------------

def invokevirtual(idx):
    return b"\xb6" + u2(idx)


def invokespecial(idx):
    return b"\xb7" + u2(idx)


def invokestatic(idx):
    return b"\xb8" + u2(idx)


def invokeinterface(idx, nargs=1):
    return b"\xb9" + u2(idx) + u1(nargs) + u1(0)


def invokedynamic(idx):
    return b"\xba" + u2(idx) + u2(0)


def getstatic(idx):
    return b"\xb2" + u2(idx)


def new(idx):
    return b"\xbb" + u2(idx)


ALOAD_0 = b"\x2a"
DUP = b"\x59"
POP = b"\x57"
ICONST_0 = b"\x03"
RETURN = b"\xb1"
ARETURN = b"\xb0"
NOP = b"\x00"
