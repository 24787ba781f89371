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

"""The built-in pickler writes exactly what the standard library writes."""

import math
import pickle

import pickle_sentry
from hypothesis import given, settings, strategies as st

scalars = (
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**63), max_value=2**63 - 1)
    | st.floats()
    | st.text()
    | st.binary()
)
hashables = st.recursive(
    st.none() | st.booleans() | st.integers(-(2**40), 2**40) | st.text(max_size=8),
    lambda inner: st.tuples(inner, inner) | st.frozensets(inner, max_size=4),
    max_leaves=8,
)
values = st.recursive(
    scalars,
    lambda inner: st.lists(inner, max_size=8)
    | st.tuples(inner)
    | st.tuples(inner, inner, inner, inner)
    | st.dictionaries(hashables, inner, max_size=6)
    | st.sets(hashables, max_size=6)
    | st.frozensets(hashables, max_size=6),
    max_leaves=40,
)


@settings(max_examples=300, deadline=None)
@given(values, st.integers(min_value=0, max_value=5))
def test_matches_standard_pickler(obj, protocol):
    assert pickle_sentry.dumps(obj, protocol) == pickle.dumps(obj, protocol=protocol)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=1200, max_size=2500), st.integers(0, 5))
def test_batching_of_long_lists(items, protocol):
    assert pickle_sentry.dumps(items, protocol) == pickle.dumps(items, protocol=protocol)


def test_shared_and_recursive_references():
    shared = [1, 2]
    loop = []
    loop.append(loop)
    cycle = {}
    cycle["self"] = cycle
    for obj in ([shared, shared, (shared,)], loop, cycle, ["", "", b"", b""]):
        for protocol in range(6):
            assert pickle_sentry.dumps(obj, protocol) == pickle.dumps(obj, protocol=protocol)


def test_special_floats_and_surrogates():
    for obj in ([math.inf, -math.inf, -0.0, math.nan], "a\ud800b", 1e300):
        for protocol in range(6):
            assert pickle_sentry.dumps(obj, protocol) == pickle.dumps(obj, protocol=protocol)


def test_one_character_strings_are_shared_objects():
    for obj in (["x", b"x"], [b"\xff", "\xff"], (None, {"\x14"}, b"\x14")):
        for protocol in range(6):
            assert pickle_sentry.dumps(obj, protocol) == pickle.dumps(obj, protocol=protocol)
