"""
Versioned tensor archives, atomic writes and content digests.

Archive layout (all integers little-endian):

    [offset] [type]      [description]
    0        4 bytes     magic b"WSAR"
    4        uint32      format version
    8        uint64      header length H
    16       H bytes     UTF-8 JSON header (sorted keys)
    16+H     ...         tensor payload, row-major, in header order

The header lists every tensor's name, dtype, shape, offset and size, the
caller's metadata, and a SHA-256 digest of the payload. Writing the same
tensors and metadata twice yields identical bytes.
"""

import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
from cryptography.hazmat.primitives import hashes
from pydantic import BaseModel

from .exceptions import DataFormatError

logger = logging.getLogger(__name__)

MAGIC = b"WSAR"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sIQ")
_DTYPES = {"<f8", "<i8", "|u1", "|b1"}

PathLike = Union[str, os.PathLike]


def sha256_hex(data: bytes) -> str:
    """SHA-256 of a byte string, hex encoded."""
    digest = hashes.Hash(hashes.SHA256())
    digest.update(data)
    return digest.finalize().hex()


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_digest(config: BaseModel, exclude: Tuple[str, ...] = ()) -> str:
    """Stable digest of a config: same field values, same digest."""
    data = config.model_dump(mode="json", exclude=set(exclude) or None)
    return sha256_hex(canonical_json(data).encode("utf-8"))


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write to a temporary sibling, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _as_storable(name: str, value: np.ndarray) -> np.ndarray:
    array = np.asarray(value)
    if array.dtype == np.bool_:
        dtype = np.dtype("|b1")
    elif array.dtype == np.uint8:
        dtype = np.dtype("|u1")
    elif np.issubdtype(array.dtype, np.integer):
        dtype = np.dtype("<i8")
    elif np.issubdtype(array.dtype, np.floating):
        dtype = np.dtype("<f8")
    else:
        raise DataFormatError(f"Tensor '{name}' has unsupported dtype {array.dtype}")
    return np.ascontiguousarray(array.astype(dtype, copy=False))


def encode_archive(tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] = None) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, value in tensors.items():
        array = _as_storable(name, value)
        raw = array.tobytes(order="C")
        entries.append(
            {
                "name": name,
                "dtype": array.dtype.str,
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "meta": dict(meta or {}),
        "tensors": entries,
        "digest": sha256_hex(payload),
    }
    header_bytes = canonical_json(header).encode("utf-8")
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)) + header_bytes + payload


def decode_archive(data: bytes) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    if len(data) < _PREAMBLE.size:
        raise DataFormatError("Archive truncated inside preamble", offset=len(data))
    magic, version, header_len = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise DataFormatError(f"Bad archive magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise DataFormatError(f"Unsupported archive version {version}", offset=4)
    start = _PREAMBLE.size
    if len(data) < start + header_len:
        raise DataFormatError("Archive truncated inside header", offset=len(data))
    try:
        header = json.loads(data[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"Archive header is not valid JSON: {e}", offset=start)

    payload_start = start + header_len
    payload = data[payload_start:]
    if sha256_hex(payload) != header.get("digest"):
        raise DataFormatError("Archive payload digest mismatch", offset=payload_start)

    tensors: Dict[str, np.ndarray] = {}
    for entry in header.get("tensors", []):
        dtype = entry["dtype"]
        if dtype not in _DTYPES:
            raise DataFormatError(f"Unsupported dtype {dtype} for '{entry['name']}'")
        begin = entry["offset"]
        end = begin + entry["nbytes"]
        if end > len(payload):
            raise DataFormatError(
                f"Tensor '{entry['name']}' runs past end of archive", offset=payload_start + begin
            )
        array = np.frombuffer(payload[begin:end], dtype=np.dtype(dtype))
        tensors[entry["name"]] = array.reshape(entry["shape"]).copy()
    return tensors, header.get("meta", {})


def write_archive(
    path: PathLike, tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] = None
) -> Path:
    path = Path(path)
    atomic_write_bytes(path, encode_archive(tensors, meta))
    logger.debug(f"Wrote archive {path} with {len(tensors)} tensors")
    return path


def read_archive(path: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    with open(path, "rb") as handle:
        return decode_archive(handle.read())
