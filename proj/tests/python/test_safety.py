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

"""Scanning exploit files never spawns, executes or unpickles anything."""

import sys

import pickle_sentry

WATCHED = (
    "os.system",
    "os.exec",
    "os.posix_spawn",
    "os.fork",
    "subprocess.Popen",
    "pickle.find_class",
    "exec",
    "compile",
    "ctypes.dlopen",
)

events = []
recording = False


def hook(event, args):
    if recording and event.startswith(WATCHED):
        events.append(event)


sys.addaudithook(hook)


def test_scanning_exploits_raises_no_audit_events(corpus):
    global recording
    root, rows = corpus
    malicious = [root / r["path"] for r in rows if r["label"] == "malicious"]
    payloads = [p.read_bytes() for p in malicious]
    recording = True
    try:
        reports = pickle_sentry.scan_tree(str(root / "malicious"), jobs=2)
        reports += pickle_sentry.scan_tree(str(root / "wrapped"), jobs=2)
        for data in payloads:
            reports.append(pickle_sentry.scan_bytes(data))
            if data[:1] == b"\x80":
                pickle_sentry.decompile(data)
    finally:
        recording = False
    assert events == []
    assert reports
    assert all(r["file_verdict"] in ("malicious", "suspicious") for r in reports)
