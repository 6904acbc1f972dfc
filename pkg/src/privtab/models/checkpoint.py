"""Single-file checkpoint container: JSON manifest + float64 binary blobs.

Layout (documented for external readers):

    bytes 0..7    magic b"PRIVTAB1"
    bytes 8..15   uint64 little-endian manifest length L
    bytes 16..16+L   UTF-8 JSON manifest, sorted keys
    remainder     data region: named arrays, row-major float64 little-endian,
                  concatenated in manifest order

The manifest carries a format tag and version, the array directory
(name -> shape, byte offset into the data region), the table schema, and
free-form run metadata. Writers emit arrays sorted by name so identical
states produce identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import DataError

MAGIC = b"PRIVTAB1"
FORMAT = "privtab.checkpoint"
VERSION = 1


def pack_checkpoint(arrays: dict, schema_doc: dict, meta: dict | None = None) -> bytes:
    directory = {}
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(np.asarray(arrays[name], dtype=np.float64))
        blob = arr.astype("<f8").tobytes()
        directory[name] = {"shape": list(arr.shape), "offset": offset, "nbytes": len(blob)}
        blobs.append(blob)
        offset += len(blob)
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "arrays": directory,
        "schema": schema_doc,
        "meta": meta or {},
    }
    mbytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(mbytes)) + mbytes + b"".join(blobs)


def unpack_checkpoint(data: bytes) -> tuple[dict, dict, dict]:
    """Returns (arrays, schema_doc, meta)."""
    if len(data) < 16 or data[:8] != MAGIC:
        raise DataError("checkpoint: bad magic (not a privtab checkpoint)")
    (mlen,) = struct.unpack("<Q", data[8:16])
    if len(data) < 16 + mlen:
        raise DataError("checkpoint: truncated manifest")
    manifest = json.loads(data[16:16 + mlen].decode("utf-8"))
    if manifest.get("format") != FORMAT:
        raise DataError(f"checkpoint: unexpected format tag {manifest.get('format')!r}")
    if manifest.get("version") != VERSION:
        raise DataError(f"checkpoint: unsupported version {manifest.get('version')!r}")
    region = data[16 + mlen:]
    arrays = {}
    for name, entry in manifest["arrays"].items():
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(region):
            raise DataError(f"checkpoint: array {name!r} extends past end of file")
        arr = np.frombuffer(region[start:start + nbytes], dtype="<f8").astype(np.float64)
        arrays[name] = arr.reshape(entry["shape"]).copy()
    return arrays, manifest["schema"], manifest["meta"]


def save_checkpoint(path, arrays: dict, schema_doc: dict, meta: dict | None = None) -> None:
    import os
    import tempfile

    data = pack_checkpoint(arrays, schema_doc, meta)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> tuple[dict, dict, dict]:
    with open(path, "rb") as fh:
        return unpack_checkpoint(fh.read())
