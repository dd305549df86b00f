"""Parameter checkpoints: a JSON manifest plus a little-endian float32 blob.

``<stem>.json`` lists every tensor (name, shape, dtype, byte offset, byte
count) and may carry free-form metadata; ``<stem>.bin`` is the concatenation
of the raw ``<f4`` buffers in manifest order.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .layers import ParamSet

FORMAT = "nore-checkpoint/1"
_DTYPE = np.dtype("<f4")


def to_bytes(state: "dict[str, np.ndarray]") -> tuple[list[dict], bytes]:
    entries, chunks, offset = [], [], 0
    for name, arr in state.items():
        buf = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "dtype": "float32",
                        "offset": offset, "nbytes": len(buf)})
        chunks.append(buf)
        offset += len(buf)
    return entries, b"".join(chunks)


def save_checkpoint(params: ParamSet, path, metadata: dict | None = None) -> tuple[Path, Path]:
    """Write ``path.json`` and ``path.bin``; returns both paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries, blob = to_bytes(params.state())
    manifest = {"format": FORMAT, "byteorder": "little", "tensors": entries,
                "metadata": metadata or {}}
    json_path, bin_path = path.with_suffix(".json"), path.with_suffix(".bin")
    bin_path.write_bytes(blob)
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return json_path, bin_path


def read_manifest(path) -> dict:
    manifest = json.loads(Path(path).with_suffix(".json").read_text())
    if manifest.get("format") != FORMAT:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format')!r}")
    return manifest


def load_state(path) -> "OrderedDict[str, np.ndarray]":
    path = Path(path)
    manifest = read_manifest(path)
    blob = path.with_suffix(".bin").read_bytes()
    state = OrderedDict()
    for e in manifest["tensors"]:
        if e["dtype"] != "float32":
            raise ValueError(f"{e['name']}: unsupported dtype {e['dtype']}")
        raw = blob[e["offset"]: e["offset"] + e["nbytes"]]
        if len(raw) != e["nbytes"]:
            raise ValueError(f"{e['name']}: truncated blob")
        state[e["name"]] = np.frombuffer(raw, dtype=_DTYPE).reshape(e["shape"]).copy()
    return state


def load_checkpoint(params: ParamSet, path) -> dict:
    """Load tensors into ``params`` in place; returns the manifest metadata."""
    params.load_state(load_state(path))
    return read_manifest(path)["metadata"]


def params_checksum(params: ParamSet) -> str:
    """sha256 over the checkpoint byte encoding of ``params``."""
    entries, blob = to_bytes(params.state())
    h = hashlib.sha256(json.dumps(entries, sort_keys=True).encode())
    h.update(blob)
    return h.hexdigest()


def file_checksum(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    for p in (path.with_suffix(".json"), path.with_suffix(".bin")):
        h.update(p.read_bytes())
    return h.hexdigest()
