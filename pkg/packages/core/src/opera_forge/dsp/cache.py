"""Binary spectrogram cache (``OPSG``).

Layout, little-endian: magic ``OPSG``, u32 version (1), u32 n_frames,
u32 n_mels, then ``n_frames * n_mels`` float32 values row-major.
"""

import struct
from pathlib import Path

import numpy as np

from opera_forge.core.exceptions import ArchiveError, DataIOError
from opera_forge.dsp.spectrogram import Spectrogram

MAGIC = b"OPSG"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def encode_spectrogram(values: np.ndarray) -> bytes:
    matrix = np.ascontiguousarray(values, dtype="<f4")
    n_frames, n_mels = matrix.shape
    return _HEADER.pack(MAGIC, VERSION, n_frames, n_mels) + matrix.tobytes()


def decode_spectrogram(payload: bytes, origin: str = "<bytes>") -> np.ndarray:
    """Parse an ``OPSG`` payload into a float32 matrix.

    Raises:
        ArchiveError: On bad magic, unknown version or truncated data
    """
    if len(payload) < _HEADER.size:
        raise ArchiveError(origin, "truncated header")
    magic, version, n_frames, n_mels = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise ArchiveError(origin, f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ArchiveError(origin, f"unsupported version {version}")
    expected = _HEADER.size + 4 * n_frames * n_mels
    if len(payload) != expected:
        raise ArchiveError(
            origin,
            f"expected {expected} bytes for {n_frames}x{n_mels}, got {len(payload)}",
        )
    data = np.frombuffer(payload, dtype="<f4", offset=_HEADER.size)
    return data.reshape(n_frames, n_mels).astype(np.float32)


def write_spectrogram(path: Path, spec: Spectrogram | np.ndarray) -> None:
    values = spec.values if isinstance(spec, Spectrogram) else spec
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_spectrogram(values))
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e


def read_spectrogram(
    path: Path, source_id: str = "", floor: float = 0.0
) -> Spectrogram:
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    values = decode_spectrogram(payload, origin=str(path))
    return Spectrogram(values=values, source_id=source_id or path.stem, floor=floor)
