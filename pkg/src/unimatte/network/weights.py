"""Named weight tensors: deterministic init and an on-disk format.

On disk a store is a directory with ``manifest.json`` and ``weights.bin``.
The manifest is a JSON array of ``{name, shape, dtype, file, byte_offset,
checksum}`` records; data is raw little-endian float32, checksum is the
SHA-256 of the tensor's bytes.
"""
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..rng import Rng, derive_seed
from .spec import build_network, param_shapes

MANIFEST = "manifest.json"
BLOB = "weights.bin"
_RUNNING_STATS = (".bn.mean", ".bn.var")


class WeightStoreError(Exception):
    pass


class MissingTensorError(WeightStoreError):
    pass


class ShapeMismatchError(WeightStoreError):
    pass


class ChecksumError(WeightStoreError):
    pass


@dataclass
class WeightStore:
    tensors: dict
    provenance: str

    def __getitem__(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise MissingTensorError(f"weight store has no tensor {name!r}") from None

    def __contains__(self, name):
        return name in self.tensors

    def names(self):
        return list(self.tensors)

    def validate(self, spec=None):
        """Check that every parameter of ``spec`` is present with the right shape."""
        expected = param_shapes(spec if spec is not None else build_network())
        for name, shape in expected.items():
            if name not in self.tensors:
                raise MissingTensorError(f"missing tensor {name!r}")
            got = tuple(self.tensors[name].shape)
            if got != tuple(shape):
                raise ShapeMismatchError(f"{name}: expected shape {tuple(shape)}, got {got}")
        extra = set(self.tensors) - set(expected)
        if extra:
            raise WeightStoreError(f"unexpected tensors: {sorted(extra)[:5]}")


def _fan_in(shape):
    return int(np.prod(shape[1:]))


def init_weights(spec=None, seed=0):
    """He-uniform (fan-in) init for conv/linear weights; neutral BN; zero biases.

    Each tensor draws from its own SplitMix64 stream keyed by (seed, name),
    so adding or reordering layers never perturbs the others.
    """
    spec = spec if spec is not None else build_network()
    tensors = {}
    for name, shape in param_shapes(spec).items():
        if name.endswith(".weight"):
            bound = math.sqrt(6.0 / _fan_in(shape))
            t = Rng(derive_seed(seed, name)).uniform(-bound, bound, shape)
        elif name.endswith((".bn.var", ".bn.gamma")):
            t = np.ones(shape, dtype=np.float32)
        else:
            t = np.zeros(shape, dtype=np.float32)
        tensors[name] = t
    return WeightStore(tensors, f"seeded({seed})")


def count_parameters(store):
    """Learnable parameter count (BN running statistics excluded)."""
    return sum(int(t.size) for name, t in store.tensors.items()
               if not name.endswith(_RUNNING_STATS))


def _checksum(buf):
    return hashlib.sha256(buf).hexdigest()


def save_weights(store, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    records = []
    offset = 0
    with open(path / BLOB, "wb") as fh:
        for name, t in store.tensors.items():
            buf = np.ascontiguousarray(t, dtype="<f4").tobytes()
            fh.write(buf)
            records.append({
                "name": name,
                "shape": list(t.shape),
                "dtype": "f32",
                "file": BLOB,
                "byte_offset": offset,
                "checksum": _checksum(buf),
            })
            offset += len(buf)
    with open(path / MANIFEST, "w") as fh:
        json.dump(records, fh, indent=1)
        fh.write("\n")


def load_weights(path, spec=None):
    """Read a store written by ``save_weights`` and validate it against ``spec``.

    Raises ``MissingTensorError``, ``ShapeMismatchError`` or ``ChecksumError``.
    """
    path = Path(path)
    manifest = path / MANIFEST
    if not manifest.is_file():
        raise MissingTensorError(f"no {MANIFEST} in {path}")
    with open(manifest) as fh:
        records = json.load(fh)
    expected = param_shapes(spec if spec is not None else build_network())
    blobs = {}
    tensors = {}
    for rec in records:
        name = rec["name"]
        shape = tuple(rec["shape"])
        if rec.get("dtype", "f32") != "f32":
            raise WeightStoreError(f"{name}: unsupported dtype {rec['dtype']!r}")
        if name in expected and shape != tuple(expected[name]):
            raise ShapeMismatchError(f"{name}: manifest shape {shape} != expected {tuple(expected[name])}")
        fname = rec["file"]
        if fname not in blobs:
            fpath = path / fname
            if not fpath.is_file():
                raise MissingTensorError(f"{name}: data file {fname} not found")
            blobs[fname] = fpath.read_bytes()
        blob = blobs[fname]
        nbytes = 4 * int(np.prod(shape))
        start = int(rec["byte_offset"])
        buf = blob[start:start + nbytes]
        if len(buf) != nbytes:
            raise MissingTensorError(f"{name}: data truncated ({len(buf)} of {nbytes} bytes)")
        if _checksum(buf) != rec["checksum"]:
            raise ChecksumError(f"{name}: checksum mismatch")
        tensors[name] = np.frombuffer(buf, dtype="<f4").astype(np.float32).reshape(shape)
    store = WeightStore(tensors, "loaded")
    store.validate(spec)
    return store
