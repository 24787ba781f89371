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

import json

import pickle_sentry
import pytest


def test_vocabulary():
    vocab = pickle_sentry.vocabulary()
    assert len(vocab) == 68
    assert len(set(vocab)) == 68
    assert len(pickle_sentry.vocabulary_fingerprint()) > 0


def test_features_of_none():
    f = pickle_sentry.features(b"N.")
    assert f["total_opcodes"] == 2
    assert len(f["freqs"]) == 68
    assert sum(f["freqs"]) == pytest.approx(1.0)


def test_errors_are_typed():
    with pytest.raises(pickle_sentry.Error):
        pickle_sentry.features(b"")


def test_scan_bytes_rule_only():
    report = pickle_sentry.scan_bytes(b"\x80\x04N.", path="none.pkl")
    assert report["path"] == "none.pkl"
    assert report["file_verdict"] == "benign"


def test_train_and_scan_tree(corpus, tmp_path):
    root, rows = corpus
    model = tmp_path / "forest.json"
    pickle_sentry.train("forest", str(root / "manifest.csv"), str(model), seed=0)
    assert json.loads(model.read_text())["format_version"] == 1
    reports = pickle_sentry.scan_tree(str(root / "benign"), model=str(model), ml_only=True, jobs=2)
    assert len(reports) == sum(r["label"] == "benign" and r["wrap_chain"] == "none" for r in rows)
    candidates = [c for r in reports for c in r["candidates"]]
    assert all(0.0 <= c["ml_score"] <= 1.0 for c in candidates)
    assert sum(r["file_verdict"] == "benign" for r in reports) >= 0.9 * len(reports)


def test_unknown_model_kind(corpus, tmp_path):
    root, _ = corpus
    with pytest.raises(ValueError):
        pickle_sentry.train("svm", str(root / "manifest.csv"), str(tmp_path / "m.json"))
