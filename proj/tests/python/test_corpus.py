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

"""Generated files are real pickles and the wrappers are standard formats."""

import bz2
import gzip
import io
import lzma
import pickletools
import tarfile
import zipfile
import zlib

import lz4.frame
import pickle_sentry
import pytest


def pickles_in(path, data):
    if zipfile.is_zipfile(io.BytesIO(data)):
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            return [zf.read(n) for n in zf.namelist() if n.endswith(".pkl")]
    return [data]


def test_base_files_parse_with_pickletools(corpus):
    root, rows = corpus
    checked = 0
    for row in rows:
        if row["wrap_chain"] != "none" or row["recipe"] == "truncated-tail":
            continue
        data = (root / row["path"]).read_bytes()
        for stream in pickles_in(row["path"], data):
            ops = list(pickletools.genops(stream))
            assert ops[-1][0].name == "STOP"
            checked += 1
    assert checked >= 80


def test_manifest_matches_files(corpus):
    root, rows = corpus
    manifest = (root / "manifest.csv").read_text().splitlines()
    assert len(manifest) == len(rows) + 1
    assert {r["label"] for r in rows} == {"benign", "malicious"}
    for row in rows:
        assert (root / row["path"]).is_file()


def std_unwrap(path, data):
    if path == "pkl":
        return data
    if path == "zip":
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            (name,) = zf.namelist()
            return zf.read(name)
    if path == "zip>zip":
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            (name,) = zf.namelist()
            return std_unwrap("zip", zf.read(name))
    if path == "tar":
        with tarfile.open(fileobj=io.BytesIO(data)) as tf:
            (member,) = tf.getmembers()
            return tf.extractfile(member).read()
    decoders = {
        "bz2": bz2.decompress,
        "gz": gzip.decompress,
        "zlib": zlib.decompress,
        "lz4": lz4.frame.decompress,
        "lzma": lambda b: lzma.decompress(b, format=lzma.FORMAT_ALONE),
        "xz": lambda b: lzma.decompress(b, format=lzma.FORMAT_XZ),
    }
    return decoders[path](data)


@pytest.mark.parametrize("path", pickle_sentry.wrap_paths())
def test_wrappers_decode_with_stdlib(path):
    payload = pickle_sentry.make_sample("reduce-exec", 5)
    data, ext = pickle_sentry.wrap(path, payload, "model.pkl")
    assert ext
    assert std_unwrap(path, data) == payload
    ((origin, inner),) = pickle_sentry.unwrap(data)
    assert inner == payload


@pytest.mark.parametrize("recipe", pickle_sentry.malicious_recipes())
def test_exploits_reference_dangerous_imports(recipe):
    data = pickle_sentry.make_sample(recipe, 1)
    report = pickle_sentry.scan_bytes(data)
    assert report["file_verdict"] == "malicious"
