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

import pickle_sentry
import pytest


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """A small generated corpus: (directory, manifest rows)."""
    root = tmp_path_factory.mktemp("corpus")
    rows = pickle_sentry.generate_corpus(str(root), seed=11, n_benign=60, n_malicious=30)
    return root, rows
