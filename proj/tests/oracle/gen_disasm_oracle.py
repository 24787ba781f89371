#!/usr/bin/env python3
# Copyright 2026 The pickle-sentry Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS-IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Reference disassemblies for the C++ disassembler.

Random object graphs are pickled by CPython at protocols 0-5 and decoded
with pickletools.genops. Each output line is one JSON case:

    {"id": ..., "protocol": p, "data": hex, "ops": [[offset, name, arg], ...]}

Arguments are canonicalized so the C++ side can compare without a Python
runtime: null / true / false, {"i": decimal}, {"f": float.hex()},
{"s": utf-8 hex (surrogatepass)}, {"b": hex}, {"g": [module hex, name hex]}.
A handful of hand-written streams cover opcodes CPython 3 never emits;
those have protocol -1.
"""

import argparse
import collections
import copyreg
import datetime
import decimal
import fractions
import io
import json
import pickle
import pickletools
import random
import sys
import types
import uuid


class Ext1:
    pass


class Ext2:
    pass


class Ext4:
    pass


class KwOnly:
    def __init__(self, a=0):
        self.a = a

    def __getnewargs_ex__(self):
        return (), {"a": self.a}


class Slotted:
    __slots__ = ("x", "y")

    def __init__(self, x, y):
        self.x = x
        self.y = y


class Stub:
    """Rendered by persistent_id, never pickled by value."""

    def __init__(self, key):
        self.key = key


copyreg.add_extension(__name__, "Ext1", 7)
copyreg.add_extension(__name__, "Ext2", 300)
copyreg.add_extension(__name__, "Ext4", 70000)


class StubPickler(pickle.Pickler):
    def persistent_id(self, obj):
        if isinstance(obj, Stub):
            return obj.key
        return None


def canon(name, arg):
    if arg is None or isinstance(arg, bool):
        return arg
    if isinstance(arg, int):
        return {"i": str(arg)}
    if isinstance(arg, float):
        return {"f": arg.hex()}
    if isinstance(arg, (bytes, bytearray)):
        return {"b": bytes(arg).hex()}
    if isinstance(arg, str):
        if name in ("GLOBAL", "INST"):
            module, _, attr = arg.partition(" ")
            return {"g": [utf8_hex(module), utf8_hex(attr)]}
        return {"s": utf8_hex(arg)}
    raise TypeError(f"unexpected argument {arg!r} for {name}")


def utf8_hex(s):
    return s.encode("utf-8", "surrogatepass").hex()


class Graphs:
    def __init__(self, rng):
        self.rng = rng
        self.pool = []

    def text(self):
        r = self.rng
        alphabet = "abcxyz _-\\'\"\n\t\x00\x7fé€\U0001f600"
        n = r.choice([0, 1, 3, 8, 40, 300])
        s = "".join(r.choice(alphabet) for _ in range(n))
        if r.random() < 0.05:
            s += "\ud800"
        return s

    def integer(self):
        r = self.rng
        bucket = r.randrange(7)
        if bucket == 0:
            return r.randrange(256)
        if bucket == 1:
            return r.randrange(256, 65536)
        if bucket == 2:
            return r.randrange(-(2**31), 2**31)
        if bucket == 3:
            return r.choice([-1, 1]) * r.randrange(2**31, 2**63)
        if bucket == 4:
            return r.choice([-1, 1]) * r.randrange(2**63, 2**300)
        if bucket == 5:
            return r.choice([0, -1, 255, 256, 65535, 65536, 2**31 - 1, -(2**31), 2**63 - 1, -(2**63), 2**64])
        return -r.randrange(1, 1000)

    def real(self):
        r = self.rng
        special = [0.0, -0.0, float("inf"), float("-inf"), float("nan"), 1e300, 5e-324, 0.1]
        if r.random() < 0.3:
            return r.choice(special)
        return r.uniform(-1e6, 1e6) * 10 ** r.randrange(-20, 20)

    def atom(self):
        r = self.rng
        kind = r.randrange(9)
        if kind == 0:
            return None
        if kind == 1:
            return r.random() < 0.5
        if kind in (2, 3):
            return self.integer()
        if kind == 4:
            return self.real()
        if kind in (5, 6):
            return self.text()
        if kind == 7:
            n = r.choice([0, 1, 10, 255, 256, 1000])
            return bytes(r.randrange(256) for _ in range(n))
        return bytearray(r.randrange(256) for _ in range(r.choice([0, 5, 300])))

    def obj(self, depth):
        r = self.rng
        kind = r.randrange(16)
        if kind == 0:
            return collections.OrderedDict((self.text(), self.node(depth - 1)) for _ in range(r.randrange(4)))
        if kind == 1:
            return complex(self.real(), self.real())
        if kind == 2:
            return datetime.date(2000 + r.randrange(30), 1 + r.randrange(12), 1 + r.randrange(28))
        if kind == 3:
            return decimal.Decimal(str(self.integer())) / 7
        if kind == 4:
            return fractions.Fraction(self.integer(), r.randrange(1, 1000))
        if kind == 5:
            return range(r.randrange(100), r.randrange(100, 200), r.randrange(1, 5))
        if kind == 6:
            return types.SimpleNamespace(a=self.atom(), b=self.node(depth - 1))
        if kind == 7:
            return uuid.UUID(int=r.getrandbits(128))
        if kind == 8:
            return collections.deque([self.atom() for _ in range(r.randrange(4))])
        if kind == 9:
            return collections.Counter({self.text(): r.randrange(10) for _ in range(r.randrange(4))})
        if kind == 10:
            return r.choice([Ext1, Ext2, Ext4])()
        if kind == 11:
            return KwOnly(self.atom())
        if kind == 12:
            return Slotted(self.atom(), self.atom())
        if kind == 13:
            return Stub(r.choice(["w0", "layer.1", 5, ("storage", "cpu", 3)]))
        if kind == 14:
            return slice(r.randrange(5), None, self.atom())
        return datetime.datetime(2020, 1, 2, 3, 4, 5, r.randrange(10**6))

    def node(self, depth):
        r = self.rng
        if self.pool and r.random() < 0.1:
            return r.choice(self.pool)
        if depth <= 0 or r.random() < 0.3:
            value = self.atom() if r.random() < 0.85 else self.obj(depth)
        else:
            kind = r.randrange(7)
            width = r.choice([0, 1, 2, 3, 4, 6])
            if r.random() < 0.02:
                # Batching boundaries; flat so the output stays small.
                n = r.randrange(999, 2100)
                if r.random() < 0.5:
                    value = [r.randrange(-300, 300) for _ in range(n)]
                else:
                    value = {i: None for i in range(n)}
                self.pool.append(value)
                return value
            if kind == 0:
                value = [self.node(depth - 1) for _ in range(width)]
                if r.random() < 0.1:
                    value.append(value)
            elif kind == 1:
                value = tuple(self.node(depth - 1) for _ in range(width))
            elif kind == 2:
                value = {self.key(): self.node(depth - 1) for _ in range(width)}
                if r.random() < 0.1:
                    value["self"] = value
            elif kind == 3:
                value = {self.key() for _ in range(width)}
            elif kind == 4:
                value = frozenset(self.key() for _ in range(width))
            elif kind == 5:
                value = self.obj(depth)
            else:
                value = self.atom()
        self.pool.append(value)
        return value

    def key(self):
        return self.text() if self.rng.random() < 0.7 else self.integer()

    def graph(self):
        self.pool = []
        return self.node(self.rng.randrange(1, 5))


def dumps(obj, protocol, rng):
    out = io.BytesIO()
    kwargs = {}
    if protocol >= 5:
        kwargs["buffer_callback"] = lambda buf: rng.random() < 0.5
        obj = [obj, pickle.PickleBuffer(bytearray(b"mutable")), pickle.PickleBuffer(b"readonly")]
    StubPickler(out, protocol, **kwargs).dump(obj)
    return out.getvalue()


HANDWRITTEN = [
    b"(S'abc'\nS\"q\\\\x\\n\"\np0\nI00\nI01\nI-7\nL12345678901234567890L\nF-1.25\ng0\n0t.",
    b"(cos\nsystem\nS'echo hi'\ni__main__\nThing\n.",
    b"\x80\x01(c__builtin__\nobject\no}q\x00b.",
    b"\x80\x01U\x03abcT\x04\x00\x00\x00wxyzh\x00j\x00\x00\x00\x00q\x01r\x02\x00\x00\x002.",
    b"\x80\x02\x82\x07\x83\x2c\x01\x84\x70\x11\x01\x00\x8b\x03\x00\x00\x00\xff\x00\x01.",
    b"(I1\nI2\n1N.",
    b"\x80\x03X\x02\x00\x00\x00hiPpid\n0N.",
    b"\x80\x04\x95\x0b\x00\x00\x00\x00\x00\x00\x00\x8d\x02\x00\x00\x00\x00\x00\x00\x00\xc3\xa9.",
    b"\x80\x05\x8e\x03\x00\x00\x00\x00\x00\x00\x00abc\x96\x01\x00\x00\x00\x00\x00\x00\x00z\x97\x98\x85.",
    b"Vcaf\\u00e9\\U0001f600\n(l]e.",
    b"\x80\x02]q\x00(K\x01M\x00\x01J\xff\xff\xff\xff\x8a\x01\xffe\x85R.",
    b"I00\n\x80\x02N\x86\x87\x88\x89.",
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=1200, help="object graphs")
    parser.add_argument("--seed", type=int, default=20240611)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    graphs = Graphs(rng)
    cases = 0
    with open(args.out, "w", encoding="ascii") as out:
        def emit(case_id, protocol, data):
            nonlocal cases
            ops = [[pos, op.name, canon(op.name, arg)] for op, arg, pos in pickletools.genops(data)]
            out.write(json.dumps({"id": case_id, "protocol": protocol, "data": data.hex(), "ops": ops}))
            out.write("\n")
            cases += 1

        for i, data in enumerate(HANDWRITTEN):
            emit(f"handwritten-{i}", -1, data)
        for g in range(args.count):
            obj = graphs.graph()
            for protocol in range(6):
                try:
                    data = dumps(obj, protocol, rng)
                except (pickle.PicklingError, TypeError, ValueError, RecursionError):
                    continue
                emit(f"graph-{g}", protocol, data)
    print(f"wrote {cases} cases to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
