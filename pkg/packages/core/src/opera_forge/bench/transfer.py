"""Zero-shot transfer of a trained probe to another task's features."""

import logging
from collections.abc import Sequence
from typing import Any

import numpy as np

from opera_forge.bench.features import FeatureSet
from opera_forge.bench.probe import ProbeModel
from opera_forge.bench.tasks import TaskSpec
from opera_forge.core.exceptions import ContractError, ShapeError

logger = logging.getLogger(__name__)


def zero_shot(
    probe: ProbeModel,
    features: FeatureSet | np.ndarray,
    labels: Sequence[Any] | np.ndarray,
    task: TaskSpec,
) -> float:
    """Score ``probe`` unchanged on another task, with that task's metric.

    Raises:
        ShapeError: If the feature dimension differs from the probe's
        ContractError: If the label spaces differ (kind, or unseen classes)
    """
    x = features.values if isinstance(features, FeatureSet) else features
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != probe.dim:
        raise ShapeError("zero_shot", x.shape, probe.weights.shape)
    if task.kind != probe.kind:
        raise ContractError(
            "zero_shot", f"probe is {probe.kind}, task '{task.task_id}' is {task.kind}"
        )
    if task.is_classification:
        unseen = set(np.unique(np.asarray(labels)).tolist()) - set(probe.classes)
        if unseen:
            raise ContractError(
                "zero_shot",
                f"labels {sorted(map(str, unseen))} not in probe classes "
                f"{list(probe.classes)}",
            )
    value = probe.score(x, labels, task.metric)
    logger.info(
        "Zero-shot %s -> %s: %s %.4f",
        probe.task_id or "?",
        task.task_id,
        task.metric,
        value,
    )
    return value
