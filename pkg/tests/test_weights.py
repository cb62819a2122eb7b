import json

import numpy as np
import pytest

from unimatte.network.weights import (ChecksumError, MissingTensorError, ShapeMismatchError,
                                      load_weights, save_weights)


@pytest.fixture(scope="module")
def saved(store, tmp_path_factory):
    path = tmp_path_factory.mktemp("w")
    save_weights(store, path)
    return path


def test_round_trip(store, saved):
    loaded = load_weights(saved)
    assert loaded.names() == store.names()
    for name in store.names():
        np.testing.assert_array_equal(loaded[name], store[name])


def test_manifest_layout(saved):
    recs = json.loads((saved / "manifest.json").read_text())
    offset = 0
    for r in recs:
        assert set(r) == {"name", "shape", "dtype", "file", "byte_offset", "checksum"}
        assert r["byte_offset"] == offset
        offset += 4 * int(np.prod(r["shape"]))
    assert (saved / "weights.bin").stat().st_size == offset


def _copy(src, dst):
    dst.mkdir()
    for f in src.iterdir():
        (dst / f.name).write_bytes(f.read_bytes())
    return dst


def test_truncated_blob(saved, tmp_path):
    d = _copy(saved, tmp_path / "t")
    blob = (d / "weights.bin").read_bytes()
    (d / "weights.bin").write_bytes(blob[:-100])
    with pytest.raises(MissingTensorError, match="truncated"):
        load_weights(d)


def test_shape_edit(saved, tmp_path):
    d = _copy(saved, tmp_path / "s")
    recs = json.loads((d / "manifest.json").read_text())
    recs[0]["shape"][0] += 1
    (d / "manifest.json").write_text(json.dumps(recs))
    with pytest.raises(ShapeMismatchError, match=recs[0]["name"]):
        load_weights(d)


def test_checksum(saved, tmp_path):
    d = _copy(saved, tmp_path / "c")
    blob = bytearray((d / "weights.bin").read_bytes())
    blob[10] ^= 0xFF
    (d / "weights.bin").write_bytes(bytes(blob))
    with pytest.raises(ChecksumError):
        load_weights(d)


def test_missing_tensor(saved, tmp_path):
    d = _copy(saved, tmp_path / "m")
    recs = json.loads((d / "manifest.json").read_text())
    (d / "manifest.json").write_text(json.dumps(recs[1:]))
    with pytest.raises(MissingTensorError, match=recs[0]["name"]):
        load_weights(d)


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingTensorError):
        load_weights(tmp_path)


def test_store_lookup(store):
    with pytest.raises(MissingTensorError):
        store["nope.weight"]
