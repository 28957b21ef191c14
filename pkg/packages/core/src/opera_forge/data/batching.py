"""Source- and modality-homogeneous pretraining batches."""

import logging
from collections import defaultdict
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from opera_forge.core.exceptions import ConfigError
from opera_forge.core.types import Modality, PadPolicy
from opera_forge.data.manifest import ClipRecord, Manifest
from opera_forge.dsp.framing import pad, pad_to_multiple, random_crop
from opera_forge.dsp.spectrogram import Spectrogram

logger = logging.getLogger(__name__)

WILDCARD = "*"

SpectrogramLoader = Callable[[ClipRecord], Spectrogram]


def crop_key(source: str, modality: Modality | str) -> str:
    return f"{source}/{modality}"


def resolve_crop(table: Mapping[str, int], source: str, modality: Modality) -> int:
    """Crop length for a pair: ``source/modality`` first, then ``*/modality``.

    Raises:
        ConfigError: If neither key is present
    """
    for key in (crop_key(source, modality), crop_key(WILDCARD, modality)):
        if key in table:
            return int(table[key])
    raise ConfigError(
        "crop_frames", f"no crop length for '{crop_key(source, modality)}'"
    )


def check_crop_table(manifest: Manifest, table: Mapping[str, int]) -> dict[str, int]:
    """Crop length for every (source, modality) present in ``manifest``.

    Raises:
        ConfigError: Naming every pair without an entry
    """
    resolved: dict[str, int] = {}
    missing: list[str] = []
    for source, modality in manifest.groups():
        try:
            resolved[crop_key(source, modality)] = resolve_crop(table, source, modality)
        except ConfigError:
            missing.append(crop_key(source, modality))
    if missing:
        raise ConfigError("crop_frames", f"missing entries for {', '.join(missing)}")
    return resolved


@dataclass(frozen=True)
class PretrainBatch:
    """Clips of one (source, modality), repeat-padded to at least ``crop_frames``.

    Every array handed to the model is cropped to exactly ``crop_frames``
    before any patch padding.
    """

    source: str
    modality: Modality
    crop_frames: int
    clip_ids: tuple[str, ...]
    spectrograms: tuple[Spectrogram, ...]

    def __len__(self) -> int:
        return len(self.spectrograms)

    def crops(self, rng: np.random.Generator, multiple: int = 1) -> np.ndarray:
        """One random crop per clip, ``(B, crop_frames, n_mels)``.

        Crops are filled with silence up to a frame count divisible by
        ``multiple``.
        """
        return np.stack(
            [
                pad_to_multiple(random_crop(s, self.crop_frames, rng), multiple).values
                for s in self.spectrograms
            ]
        )


def build_pretrain_batches(
    manifest: Manifest,
    batch_size: int,
    crop_table: Mapping[str, int],
    load: SpectrogramLoader,
    seed: int = 0,
) -> list[PretrainBatch]:
    """Group clips by (source, modality) into equal-size batches.

    Clips are shuffled within each group, leftovers smaller than a batch are
    dropped and the batch order is shuffled, all from ``seed``.

    Raises:
        ConfigError: If ``batch_size < 1`` or the crop table misses a pair
    """
    if batch_size < 1:
        raise ConfigError("batch_size", f"must be >= 1, got {batch_size}")
    crops = check_crop_table(manifest, crop_table)
    rng = np.random.default_rng(seed)

    by_group: dict[tuple[str, Modality], list[ClipRecord]] = defaultdict(list)
    for record in manifest.records:
        by_group[record.group].append(record)

    batches: list[PretrainBatch] = []
    for source, modality in sorted(by_group):
        records = by_group[(source, modality)]
        crop = crops[crop_key(source, modality)]
        order = rng.permutation(len(records))
        n_full = len(records) // batch_size
        dropped = len(records) - n_full * batch_size
        if dropped:
            logger.debug(
                "Dropping %d leftover clips of %s/%s", dropped, source, modality
            )
        for b in range(n_full):
            chosen = [records[i] for i in order[b * batch_size : (b + 1) * batch_size]]
            specs = tuple(pad(load(r), crop, PadPolicy.REPEAT) for r in chosen)
            batches.append(
                PretrainBatch(
                    source=source,
                    modality=modality,
                    crop_frames=crop,
                    clip_ids=tuple(r.id for r in chosen),
                    spectrograms=specs,
                )
            )

    shuffled = [batches[i] for i in rng.permutation(len(batches))]
    logger.info(
        "Built %d pretraining batches of %d from %d clips",
        len(shuffled),
        batch_size,
        len(manifest),
    )
    return shuffled
