"""Named-tensor archive (``OPCK``).

Layout, little-endian: magic ``OPCK``, u32 version, u32 tensor count; then
per tensor u16 name length, UTF-8 name, u8 ndim, u32 dims, float32 data.
Structured metadata rides along as a 1-D tensor of byte values under a
reserved name (see :func:`pack_text`).
"""

import struct
from pathlib import Path

import numpy as np

from opera_forge.core.exceptions import ArchiveError, DataIOError

MAGIC = b"OPCK"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_NAME_LEN = struct.Struct("<H")
_NDIM = struct.Struct("<B")


def pack_text(text: str) -> np.ndarray:
    """Store UTF-8 text as float32 byte values (exact for 0..255)."""
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float32)


def unpack_text(values: np.ndarray) -> str:
    return np.asarray(values).astype(np.uint8).tobytes().decode("utf-8")


def encode_archive(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        data = np.ascontiguousarray(array, dtype="<f4")
        parts.append(_NAME_LEN.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_NDIM.pack(data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())
    return b"".join(parts)


def decode_archive(payload: bytes, origin: str = "<bytes>") -> dict[str, np.ndarray]:
    """Parse an ``OPCK`` payload.

    Raises:
        ArchiveError: On bad magic, unknown version, truncation or trailing bytes
    """

    def take(size: int, what: str) -> bytes:
        nonlocal offset
        if offset + size > len(payload):
            raise ArchiveError(origin, f"truncated while reading {what}")
        chunk = payload[offset : offset + size]
        offset += size
        return chunk

    offset = 0
    magic, version, count = _HEADER.unpack(take(_HEADER.size, "header"))
    if magic != MAGIC:
        raise ArchiveError(origin, f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ArchiveError(origin, f"unsupported version {version}")

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = _NAME_LEN.unpack(take(_NAME_LEN.size, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (ndim,) = _NDIM.unpack(take(_NDIM.size, f"ndim of '{name}'"))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, f"dims of '{name}'"))
        n_values = int(np.prod(dims)) if ndim else 1
        data = np.frombuffer(take(4 * n_values, f"data of '{name}'"), dtype="<f4")
        tensors[name] = data.reshape(dims).astype(np.float32)
    if offset != len(payload):
        raise ArchiveError(origin, f"{len(payload) - offset} trailing bytes")
    return tensors


def save_archive(path: Path, tensors: dict[str, np.ndarray]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_archive(tensors))
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e


def load_archive(path: Path) -> dict[str, np.ndarray]:
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    return decode_archive(payload, origin=str(path))
