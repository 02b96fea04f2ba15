"""Run manifests and the binary parameter checkpoint format.

A manifest records everything needed to reproduce a command: the
command name, the fully resolved configuration (defaults made
explicit), the seed, a content fingerprint of the input data, the
package version, and the wall-clock duration.  Re-running the same
command with the same resolved configuration reproduces every numeric
output byte for byte; the duration field is informational only.

Checkpoints store a small JSON header (shapes and the architecture)
followed by raw little-endian float64 blocks, one per parameter matrix
in declaration order (w, wl, wr, wh, wg) plus the scalar gamma, layer
by layer.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .exceptions import ParameterError
from .gnn import MATRIX_FIELDS, GsaLayerParams, ModelSpec

CHECKPOINT_MAGIC = b"GSAPARAMS\n"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    seed: int
    dataset_fingerprint: str
    artifact_version: str
    duration_s: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def write_manifest(manifest: RunManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
        fh.write("\n")


def read_manifest(path) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return RunManifest(**raw)


def fingerprint_files(paths) -> str:
    """sha256 over (basename, contents) of the given files, sorted."""
    import os

    digest = hashlib.sha256()
    for path in sorted(paths, key=lambda p: os.path.basename(str(p))):
        digest.update(os.path.basename(str(path)).encode())
        digest.update(b"\0")
        with open(path, "rb") as fh:
            while chunk := fh.read(1 << 20):
                digest.update(chunk)
        digest.update(b"\0")
    return digest.hexdigest()


def fingerprint_config(config: dict) -> str:
    """Fingerprint for datasets that exist only as a generator config."""
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, spec: ModelSpec, params: list[GsaLayerParams]) -> None:
    header = {
        "layer_dims": list(spec.layer_dims),
        "attention": [bool(a) for a in spec.attention],
        "activation": spec.activation,
        "dropout_rate": spec.dropout_rate,
        "attn_dim_divisor": spec.attn_dim_divisor,
        "layers": [
            {name: list(getattr(p, name).shape) for name in MATRIX_FIELDS}
            for p in params
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for p in params:
            for name in MATRIX_FIELDS:
                arr = np.ascontiguousarray(getattr(p, name), dtype="<f8")
                fh.write(arr.tobytes())
            fh.write(struct.pack("<d", p.gamma))


def load_checkpoint(path) -> tuple[ModelSpec, list[GsaLayerParams]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ParameterError(f"{path} is not a parameter checkpoint")
        prefix = fh.read(8)
        if len(prefix) != 8:
            raise ParameterError("checkpoint truncated")
        version, header_len = struct.unpack("<II", prefix)
        if version != CHECKPOINT_VERSION:
            raise ParameterError(f"unsupported checkpoint version {version}")
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise ParameterError("checkpoint truncated")
        try:
            header = json.loads(header_bytes.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParameterError(f"unreadable checkpoint header: {exc}") from exc
        spec = ModelSpec(
            layer_dims=tuple(header["layer_dims"]),
            attention=tuple(header["attention"]),
            activation=header["activation"],
            dropout_rate=header["dropout_rate"],
            attn_dim_divisor=header["attn_dim_divisor"],
        )
        params = []
        for shapes in header["layers"]:
            mats = {}
            for name in MATRIX_FIELDS:
                rows, cols = shapes[name]
                buf = fh.read(rows * cols * 8)
                if len(buf) != rows * cols * 8:
                    raise ParameterError("checkpoint truncated")
                mats[name] = np.frombuffer(buf, dtype="<f8").reshape(rows, cols).copy()
            gamma_buf = fh.read(8)
            if len(gamma_buf) != 8:
                raise ParameterError("checkpoint truncated")
            (gamma,) = struct.unpack("<d", gamma_buf)
            params.append(GsaLayerParams(gamma=gamma, **mats))
        if fh.read(1):
            raise ParameterError("trailing bytes after checkpoint payload")
    return spec, params
