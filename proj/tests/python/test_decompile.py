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

"""Decompiled plain data evaluates back to the pickled value."""

import codecs
import math
import pickle

import pickle_sentry
from hypothesis import given, settings, strategies as st

ALLOWED = {"bytes": bytes, "set": set, "frozenset": frozenset, "bytearray": bytearray, "float": float}


def fake_import(name, globals=None, locals=None, fromlist=(), level=0):
    if name in ("builtins", "__builtin__"):
        return type("builtins", (), ALLOWED)
    if name == "_codecs":
        return type("_codecs", (), {"encode": staticmethod(codecs.encode)})
    raise ImportError(name)


def run(source):
    scope = {"__builtins__": dict(ALLOWED, __import__=fake_import)}
    exec(compile(source, "<decompiled>", "exec"), scope)
    return scope["result"]


def same(a, b):
    if isinstance(a, float) and isinstance(b, float):
        return (math.isnan(a) and math.isnan(b)) or (a == b and math.copysign(1, a) == math.copysign(1, b))
    if type(a) is not type(b):
        return False
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return list(a) == list(b) and all(same(a[k], b[k]) for k in a)
    return a == b


keys = st.none() | st.booleans() | st.integers() | st.text(max_size=6) | st.binary(max_size=6)
values = st.recursive(
    keys | st.floats() | st.builds(bytearray, st.binary(max_size=6)),
    lambda inner: st.lists(inner, max_size=5)
    | st.tuples(inner, inner)
    | st.dictionaries(keys, inner, max_size=5)
    | st.sets(st.integers(), max_size=4)
    | st.frozensets(st.text(max_size=4), max_size=4),
    max_leaves=25,
)


@settings(max_examples=300, deadline=None)
@given(values, st.integers(min_value=0, max_value=5))
def test_round_trip(obj, protocol):
    source = pickle_sentry.decompile(pickle.dumps(obj, protocol=protocol))
    assert same(run(source), obj), source


def test_call_is_rendered_not_run():
    data = pickle_sentry.make_sample("reduce-exec", 0)
    assert "_run_code(" in pickle_sentry.decompile(data)
    assert ("runpy", "_run_code") in pickle_sentry.extract_imports(data)


@settings(max_examples=300, deadline=None)
@given(values, st.integers(min_value=0, max_value=5), st.data())
def test_mutated_streams_still_render(obj, protocol, data):
    raw = bytearray(pickle.dumps(obj, protocol=protocol))
    for _ in range(data.draw(st.integers(1, 4))):
        raw[data.draw(st.integers(0, len(raw) - 1))] = data.draw(st.integers(0, 255))
    try:
        source = pickle_sentry.decompile(bytes(raw))
    except pickle_sentry.Error:
        return
    assert isinstance(source, str)
