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
"""Static scanner for pickle-based model files.

Nothing here unpickles its input: files are disassembled and classified
from their opcode statistics.
"""

from ._core import (
    Error,
    benign_recipes,
    decompile,
    disassemble,
    dumps,
    extract_imports,
    features,
    generate_corpus,
    make_sample,
    malicious_recipes,
    scan_bytes,
    scan_tree,
    train,
    unwrap,
    vocabulary,
    vocabulary_fingerprint,
    wrap,
    wrap_paths,
)

__version__ = "0.1.0"

__all__ = [
    "Error",
    "benign_recipes",
    "decompile",
    "disassemble",
    "dumps",
    "extract_imports",
    "features",
    "generate_corpus",
    "make_sample",
    "malicious_recipes",
    "scan_bytes",
    "scan_tree",
    "train",
    "unwrap",
    "vocabulary",
    "vocabulary_fingerprint",
    "wrap",
    "wrap_paths",
]
