"""Shared binary container used by the .skna / .sknads / .sknamodel formats.

Layout (all integers little-endian):

    magic      8 bytes   format-specific constant
    version    u16       format version
    meta_len   u32       length of the UTF-8 JSON metadata block
    meta       bytes     JSON object (shapes, names, annotations, ...)
    blob_len   u64       length of the raw payload
    blob       bytes     raw payload (little-endian float32 tensors)
    crc32      u32       CRC32 of blob

Writes are atomic (temp file + rename) so a crashed writer never leaves a
half-written artifact behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

from .errors import (
    BadMagicError,
    BadVersionError,
    ChecksumMismatchError,
    TruncatedPayloadError,
)

_HEADER = struct.Struct("<8sHI")
_BLOB_LEN = struct.Struct("<Q")
_CRC = struct.Struct("<I")


def write_container(path, magic: bytes, version: int, meta: dict, blob: bytes) -> None:
    if len(magic) != 8:
        raise ValueError("magic must be exactly 8 bytes")
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_HEADER.pack(magic, version, len(meta_bytes)))
            fh.write(meta_bytes)
            fh.write(_BLOB_LEN.pack(len(blob)))
            fh.write(blob)
            fh.write(_CRC.pack(zlib.crc32(blob) & 0xFFFFFFFF))
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def read_container(path, magic: bytes, version: int) -> tuple[dict, bytes]:
    """Read and validate a container, returning (meta, blob).

    Raises BadMagicError / BadVersionError / TruncatedPayloadError /
    ChecksumMismatchError; never returns a partial value.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than header ({len(data)} bytes)")
    got_magic, got_version, meta_len = _HEADER.unpack_from(data, 0)
    if got_magic != magic:
        raise BadMagicError(f"{path}: magic {got_magic!r} != expected {magic!r}")
    if got_version != version:
        raise BadVersionError(f"{path}: format version {got_version}, reader supports {version}")
    off = _HEADER.size
    if len(data) < off + meta_len + _BLOB_LEN.size:
        raise TruncatedPayloadError(f"{path}: metadata block truncated")
    try:
        meta = json.loads(data[off : off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedPayloadError(f"{path}: metadata block unreadable: {exc}") from exc
    off += meta_len
    (blob_len,) = _BLOB_LEN.unpack_from(data, off)
    off += _BLOB_LEN.size
    if len(data) < off + blob_len + _CRC.size:
        raise TruncatedPayloadError(f"{path}: payload truncated")
    blob = data[off : off + blob_len]
    (stored_crc,) = _CRC.unpack_from(data, off + blob_len)
    if zlib.crc32(blob) & 0xFFFFFFFF != stored_crc:
        raise ChecksumMismatchError(f"{path}: payload CRC32 mismatch")
    return meta, blob
