"""Frozen-encoder feature extraction and the ``OPFE`` feature file.

``OPFE`` layout, little-endian: magic ``OPFE``, u32 version, u32 n_clips,
u32 dim; then per clip a u16 id length and the UTF-8 id; then the
``n_clips x dim`` float32 matrix row-major.
"""

import logging
import struct
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from opera_forge.autodiff.tensor import Tensor, no_grad
from opera_forge.bench.tasks import TaskSpec
from opera_forge.core.exceptions import (
    ArchiveError,
    DataIOError,
    InvalidInputError,
    LengthError,
)
from opera_forge.dsp.framing import pad, pad_to_multiple, segment_frames
from opera_forge.dsp.spectrogram import Spectrogram
from opera_forge.models.checkpoint import Encoder

logger = logging.getLogger(__name__)

MAGIC = b"OPFE"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_ID_LEN = struct.Struct("<H")


@dataclass(frozen=True)
class FeatureSet:
    """Clip ids and their ``(n, d)`` feature rows."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] != len(self.ids):
            raise ArchiveError(
                "<features>", f"{len(self.ids)} ids for matrix {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        """Feature rows for ``ids``, in that order.

        Raises:
            InvalidInputError: If an id has no features
        """
        index = {clip_id: i for i, clip_id in enumerate(self.ids)}
        missing = [i for i in ids if i not in index]
        if missing:
            raise InvalidInputError(
                "features", f"{len(missing)} clips lack features, e.g. '{missing[0]}'"
            )
        return self.values[[index[i] for i in ids]]


def embed_clip(encoder: Encoder, spec: Spectrogram, task: TaskSpec) -> np.ndarray:
    """Mean of the segment embeddings of one clip.

    The clip is padded per ``task.pad_policy`` up to the encoder minimum,
    then cut into encoder-maximum windows with half-window hop. Windows are
    filled with silence up to whole patches.

    Raises:
        LengthError: Naming the clip if the encoder still rejects it
    """
    cfg = encoder.cfg
    padded = pad(spec, cfg.min_frames, task.pad_policy)
    frame_len = cfg.max_input_frames
    segments = [
        pad_to_multiple(s, cfg.frame_multiple)
        for s in segment_frames(padded, frame_len, max(1, frame_len // 2))
    ]
    batch = np.stack([s.values for s in segments])
    with no_grad():
        try:
            z = encoder(Tensor.constant(batch))
        except LengthError as e:
            raise LengthError(e.n_frames, e.minimum, clip_id=spec.source_id) from e
    return z.data.mean(axis=0)


def extract_features(
    encoder: Encoder,
    clips: Sequence[Spectrogram],
    task: TaskSpec,
    threads: int = 1,
) -> FeatureSet:
    """Embed every clip with a frozen encoder; rows follow ``clips`` order."""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda s: embed_clip(encoder, s, task), clips))
    dim = encoder.cfg.embed_dim
    values = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    logger.debug("Extracted %d x %d features for %s", len(rows), dim, task.task_id)
    return FeatureSet(ids=tuple(s.source_id for s in clips), values=values)


def encode_features(features: FeatureSet) -> bytes:
    n, dim = features.values.shape
    parts = [_HEADER.pack(MAGIC, VERSION, n, dim)]
    for clip_id in features.ids:
        encoded = clip_id.encode("utf-8")
        parts.append(_ID_LEN.pack(len(encoded)) + encoded)
    parts.append(np.ascontiguousarray(features.values, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_features(payload: bytes, origin: str = "<bytes>") -> FeatureSet:
    """Parse an ``OPFE`` payload.

    Raises:
        ArchiveError: On bad magic, unknown version or a size mismatch
    """
    if len(payload) < _HEADER.size:
        raise ArchiveError(origin, "truncated header")
    magic, version, n, dim = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise ArchiveError(origin, f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ArchiveError(origin, f"unsupported version {version}")
    offset = _HEADER.size
    ids = []
    for _ in range(n):
        if offset + _ID_LEN.size > len(payload):
            raise ArchiveError(origin, "truncated id index")
        (length,) = _ID_LEN.unpack_from(payload, offset)
        offset += _ID_LEN.size
        ids.append(payload[offset : offset + length].decode("utf-8"))
        offset += length
    if len(payload) - offset != 4 * n * dim:
        raise ArchiveError(origin, f"expected {4 * n * dim} bytes of features")
    values = np.frombuffer(payload, dtype="<f4", offset=offset).reshape(n, dim)
    return FeatureSet(ids=tuple(ids), values=values.astype(np.float32))


def write_features(path: Path, features: FeatureSet) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_features(features))
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    logger.info("Wrote %d feature rows to %s", len(features.ids), path)


def read_features(path: Path) -> FeatureSet:
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    return decode_features(payload, origin=str(path))
