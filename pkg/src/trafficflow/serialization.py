"""Versioned binary container shared by the model and dataset file formats.

Layout:  magic string | u32 format version | u64 header length | JSON header
(with an array manifest) | raw little-endian array payloads in manifest
order | sha256 digest of everything before it.

The header JSON is dumped with sorted keys so that identical content always
produces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

__all__ = [
    "ContainerFormatError",
    "VersionMismatchError",
    "ChecksumError",
    "write_container",
    "read_container",
    "atomic_write_bytes",
    "atomic_write_text",
]

_DIGEST_LEN = 32


class ContainerFormatError(ValueError):
    """File is not a container of the expected kind."""


class VersionMismatchError(ValueError):
    """Container format version is not the one this build reads."""


class ChecksumError(ValueError):
    """Container bytes fail their integrity check (truncated or corrupt)."""


def write_container(
    magic: bytes,
    version: int,
    header: dict,
    arrays: list[tuple[str, np.ndarray]],
) -> bytes:
    """Serialize ``header`` plus named arrays into one checksummed blob."""
    manifest = []
    payload = bytearray()
    for name, array in arrays:
        array = np.ascontiguousarray(array)
        manifest.append({"name": name, "dtype": array.dtype.str, "shape": list(array.shape)})
        payload.extend(array.astype(array.dtype.newbyteorder("<")).tobytes())
    full_header = dict(header)
    full_header["arrays"] = manifest
    header_bytes = json.dumps(full_header, sort_keys=True).encode("utf-8")
    body = bytearray()
    body.extend(magic)
    body.extend(struct.pack("<I", version))
    body.extend(struct.pack("<Q", len(header_bytes)))
    body.extend(header_bytes)
    body.extend(payload)
    body.extend(hashlib.sha256(bytes(body)).digest())
    return bytes(body)


def read_container(
    data: bytes, magic: bytes, version: int
) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse and verify a container; returns (header, arrays by name)."""
    if not data.startswith(magic):
        raise ContainerFormatError("bad magic string")
    if len(data) < len(magic) + 12 + _DIGEST_LEN:
        raise ChecksumError("container truncated")
    digest = data[-_DIGEST_LEN:]
    body = data[:-_DIGEST_LEN]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError("container checksum mismatch")
    offset = len(magic)
    (found_version,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if found_version != version:
        raise VersionMismatchError(f"format version {found_version}, expected {version}")
    (header_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    arrays: dict[str, np.ndarray] = {}
    for entry in header.pop("arrays", []):
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = dtype.itemsize * count
        raw = body[offset : offset + nbytes]
        if len(raw) != nbytes:
            raise ChecksumError(f"array {entry['name']!r} truncated")
        arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(body):
        raise ContainerFormatError("trailing bytes after declared arrays")
    return header, arrays


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the target directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
