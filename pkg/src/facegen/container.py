"""Matrix container: a JSON manifest naming tensors plus one raw blob.

The manifest lists {name, shape, dtype in {f32, f64}, byte_offset} per
tensor; the blob is little-endian, row-major, tensors concatenated in
manifest order.  Writing is deterministic (sorted JSON keys, fixed
separators) so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_TAGS = {np.dtype("float32"): "f32", np.dtype("float64"): "f64"}


def save_container(manifest_path, tensors: dict[str, np.ndarray],
                   metadata: dict | None = None) -> None:
    """Write tensors to `<path>` (manifest) and `<path stem>.bin` (blob)."""
    manifest_path = Path(manifest_path)
    blob_path = manifest_path.with_suffix(".bin")
    entries = []
    offset = 0
    chunks = []
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        if arr.dtype not in _TAGS:
            arr = arr.astype(np.float64)
        tag = _TAGS[arr.dtype]
        raw = np.ascontiguousarray(arr).astype(_DTYPES[tag]).tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": tag,
            "byte_offset": offset,
        })
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "version": 1,
        "blob": blob_path.name,
        "tensors": entries,
    }
    if metadata is not None:
        manifest["metadata"] = metadata
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    blob_path.write_bytes(b"".join(chunks))


def load_container(manifest_path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a container; returns (tensors, metadata)."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"invalid container manifest {manifest_path}: {e}") from e
    if "tensors" not in manifest or "blob" not in manifest:
        raise DataError(f"container manifest {manifest_path} missing tensors/blob")
    blob = (manifest_path.parent / manifest["blob"]).read_bytes()
    tensors = {}
    for ent in manifest["tensors"]:
        dtype = _DTYPES.get(ent["dtype"])
        if dtype is None:
            raise DataError(f"unsupported dtype {ent['dtype']!r} in {manifest_path}")
        shape = tuple(ent["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = ent["byte_offset"]
        end = start + count * dtype.itemsize
        if end > len(blob):
            raise DataError(f"tensor {ent['name']!r} overruns blob in {manifest_path}")
        arr = np.frombuffer(blob[start:end], dtype=dtype).reshape(shape)
        tensors[ent["name"]] = arr.astype(np.float64) if ent["dtype"] == "f64" \
            else arr.astype(np.float32)
    return tensors, manifest.get("metadata", {})
