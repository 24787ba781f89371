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

"""Disassembly agrees with pickletools on positions, names and arguments."""

import math
import pickle
import pickletools

import pickle_sentry
from hypothesis import given, settings, strategies as st


def reference(data):
    return [(pos, op.name, arg) for op, arg, pos in pickletools.genops(data)]


def same_arg(name, ours, theirs):
    if name in ("GLOBAL", "INST"):
        return " ".join(ours) == theirs
    if isinstance(theirs, float):
        return (math.isnan(ours) and math.isnan(theirs)) or ours == theirs
    if isinstance(theirs, bytearray):
        return ours == bytes(theirs)
    if isinstance(theirs, bytes) and isinstance(ours, str):
        return ours == theirs.decode("latin-1")
    if name in ("STRING", "BINSTRING", "SHORT_BINSTRING") and isinstance(theirs, str):
        return ours == theirs
    return ours == theirs and type(ours) is type(theirs)


def check(data):
    (segment,) = pickle_sentry.disassemble(data)
    assert segment["well_formed"]
    expected = reference(data)
    assert [(p, n) for p, n, _ in segment["events"]] == [(p, n) for p, n, _ in expected]
    for (_, name, ours), (_, _, theirs) in zip(segment["events"], expected):
        assert same_arg(name, ours, theirs), (name, ours, theirs)


def test_vocabulary_matches_pickletools():
    ours = pickle_sentry.vocabulary()
    theirs = sorted(pickletools.opcodes, key=lambda op: op.code)
    assert ours == [op.name for op in theirs]


values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers()
    | st.floats()
    | st.text()
    | st.binary()
    | st.builds(bytearray, st.binary(max_size=20)),
    lambda inner: st.lists(inner, max_size=6)
    | st.tuples(inner, inner)
    | st.dictionaries(st.text(max_size=5), inner, max_size=5)
    | st.frozensets(st.integers(), max_size=5),
    max_leaves=30,
)


@settings(max_examples=400, deadline=None)
@given(values, st.integers(min_value=0, max_value=5))
def test_random_graphs(obj, protocol):
    check(pickle.dumps(obj, protocol=protocol))


def test_protocol_zero_text_forms():
    for obj in ["it's \"quoted\"\n\\", "€\ud800", 10**30, -(10**30), 1.0 / 3, b"\x00\xff"]:
        for protocol in (0, 1):
            check(pickle.dumps(obj, protocol=protocol))
