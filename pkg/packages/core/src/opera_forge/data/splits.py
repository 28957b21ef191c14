"""Train/val/test partitions that keep every subject on one side."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import LeaveOneGroupOut

from opera_forge.core.exceptions import ConfigError, SplitError
from opera_forge.core.types import SplitStrategy
from opera_forge.data.manifest import Manifest

logger = logging.getLogger(__name__)

PARTITIONS = ("train", "val", "test")


@dataclass(frozen=True)
class SplitPlan:
    """Clip ids per partition.

    Attributes:
        fold: Held-out subject for a leave-one-subject-out fold
    """

    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    strategy: SplitStrategy
    fold: str | None = None

    def __post_init__(self) -> None:
        parts = (set(self.train), set(self.val), set(self.test))
        if sum(len(p) for p in parts) != len(parts[0] | parts[1] | parts[2]):
            raise SplitError(self.strategy, "partitions share clip ids")

    def partition(self, name: str) -> tuple[str, ...]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def _partition_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment; every non-zero ratio gets at least one."""
    raw = [r * n for r in ratios]
    sizes = [math.floor(x) for x in raw]
    by_remainder = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in by_remainder[: n - sum(sizes)]:
        sizes[i] += 1
    for i, ratio in enumerate(ratios):
        if ratio > 0.0 and sizes[i] == 0:
            donor = max(range(len(sizes)), key=lambda j: (sizes[j], -j))
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes


def split_participant_independent(
    manifest: Manifest,
    ratios: Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> SplitPlan:
    """Shuffle subjects with ``seed`` and cut them into train/val/test by ratio.

    Raises:
        ConfigError: If the ratios are not three non-negative values summing to 1
        SplitError: If there are fewer subjects than non-empty partitions
    """
    if len(ratios) != 3 or min(ratios) < 0.0 or not math.isclose(sum(ratios), 1.0):
        raise ConfigError("ratios", f"need three values summing to 1, got {ratios}")
    subjects = manifest.subjects()
    needed = sum(1 for r in ratios if r > 0.0)
    if len(subjects) < needed:
        raise SplitError(
            SplitStrategy.PARTICIPANT_INDEPENDENT,
            f"{len(subjects)} subjects for {needed} non-empty partitions",
        )

    shuffled = np.random.default_rng(seed).permutation(len(subjects))
    order = [subjects[i] for i in shuffled]
    sizes = _partition_sizes(len(subjects), ratios)
    owner: dict[str, str] = {}
    start = 0
    for name, size in zip(PARTITIONS, sizes, strict=True):
        for subject in order[start : start + size]:
            owner[subject] = name
        start += size

    ids: dict[str, list[str]] = {name: [] for name in PARTITIONS}
    for record in manifest.records:
        ids[owner[record.subject_id]].append(record.id)
    logger.debug("Participant-independent subject counts: %s", sizes)
    return SplitPlan(
        train=tuple(ids["train"]),
        val=tuple(ids["val"]),
        test=tuple(ids["test"]),
        strategy=SplitStrategy.PARTICIPANT_INDEPENDENT,
    )


def loso_splits(manifest: Manifest) -> list[SplitPlan]:
    """One fold per subject, that subject forming the whole test set.

    Raises:
        SplitError: If the manifest has fewer than two subjects
    """
    groups = np.array([r.subject_id for r in manifest.records])
    if np.unique(groups).size < 2:
        raise SplitError(SplitStrategy.LOSO, "need at least two subjects")
    ids = [r.id for r in manifest.records]
    plans = []
    for train_idx, test_idx in LeaveOneGroupOut().split(ids, groups=groups):
        plans.append(
            SplitPlan(
                train=tuple(ids[i] for i in train_idx),
                val=(),
                test=tuple(ids[i] for i in test_idx),
                strategy=SplitStrategy.LOSO,
                fold=str(groups[test_idx[0]]),
            )
        )
    return plans


def split_official(manifest: Manifest) -> SplitPlan:
    """Partition by each record's own ``split`` field.

    Raises:
        SplitError: If a record has no valid split or train/test end up empty
    """
    ids: dict[str, list[str]] = {name: [] for name in PARTITIONS}
    for record in manifest.records:
        if record.split not in ids:
            raise SplitError(
                SplitStrategy.OFFICIAL,
                f"record '{record.id}' has split {record.split!r}",
            )
        ids[record.split].append(record.id)
    if not ids["train"] or not ids["test"]:
        raise SplitError(SplitStrategy.OFFICIAL, "train and test must be non-empty")
    return SplitPlan(
        train=tuple(ids["train"]),
        val=tuple(ids["val"]),
        test=tuple(ids["test"]),
        strategy=SplitStrategy.OFFICIAL,
    )


def make_splits(
    manifest: Manifest, strategy: SplitStrategy, seed: int = 0
) -> list[SplitPlan]:
    if strategy == SplitStrategy.LOSO:
        return loso_splits(manifest)
    if strategy == SplitStrategy.OFFICIAL:
        return [split_official(manifest)]
    return [split_participant_independent(manifest, seed=seed)]


def assert_no_leakage(plan: SplitPlan, manifest: Manifest) -> None:
    """Raise if any subject contributes clips to two partitions.

    Raises:
        SplitError: Naming the first leaking subject
    """
    subject_of = {r.id: r.subject_id for r in manifest.records}
    owner: dict[str, str] = {}
    for name in PARTITIONS:
        for clip_id in plan.partition(name):
            subject = subject_of[clip_id]
            if owner.setdefault(subject, name) != name:
                raise SplitError(
                    plan.strategy,
                    f"subject '{subject}' appears in {owner[subject]} and {name}",
                )
