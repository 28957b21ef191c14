"""Downstream benchmark: features, probes, metrics, ranking and reports."""

from opera_forge.bench.features import FeatureSet, extract_features
from opera_forge.bench.finetune import FinetuneConfig, FinetuneResult, finetune
from opera_forge.bench.metrics import (
    auroc,
    auroc_multiclass,
    mae,
    mape,
    paired_ttest,
    welch_ttest,
)
from opera_forge.bench.probe import ProbeConfig, ProbeModel, train_probe
from opera_forge.bench.ranking import MethodTable, MrrReport, mrr, reproduce_mrr_fixture
from opera_forge.bench.runner import (
    BenchmarkPlan,
    BenchmarkResult,
    ResultRecord,
    finetune_records,
    load_plan,
    run_benchmark,
)
from opera_forge.bench.tasks import CATALOG, TaskSpec, get_task
from opera_forge.bench.transfer import zero_shot

__all__ = [
    "CATALOG",
    "BenchmarkPlan",
    "BenchmarkResult",
    "FeatureSet",
    "FinetuneConfig",
    "FinetuneResult",
    "MethodTable",
    "MrrReport",
    "ProbeConfig",
    "ProbeModel",
    "ResultRecord",
    "TaskSpec",
    "auroc",
    "auroc_multiclass",
    "extract_features",
    "finetune",
    "finetune_records",
    "get_task",
    "load_plan",
    "mae",
    "mape",
    "mrr",
    "paired_ttest",
    "reproduce_mrr_fixture",
    "run_benchmark",
    "train_probe",
    "welch_ttest",
    "zero_shot",
]
