"""End-to-end benchmark runs: features, probes, aggregation and reports."""

import csv
import io
import logging
import tomllib
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from opera_forge.bench.features import FeatureSet, extract_features
from opera_forge.bench.finetune import FinetuneConfig, finetune
from opera_forge.bench.probe import ProbeConfig, train_probe
from opera_forge.bench.ranking import MethodTable
from opera_forge.bench.report import write_report
from opera_forge.bench.tasks import TaskSpec, get_task
from opera_forge.core.exceptions import (
    ConfigError,
    DataIOError,
    InvalidInputError,
    OperaError,
)
from opera_forge.core.types import Direction, Metric, SplitStrategy
from opera_forge.data.curation import spectrogram_loader
from opera_forge.data.manifest import Manifest, load_manifest
from opera_forge.data.splits import SplitPlan, assert_no_leakage, make_splits
from opera_forge.dsp.spectrogram import DspConfig, Spectrogram
from opera_forge.models.checkpoint import Encoder, EncoderCheckpoint, build_encoder
from opera_forge.models.config import EncoderConfig

logger = logging.getLogger(__name__)

RESULTS_NAME = "results.csv"
REPORT_NAME = "report.md"
CSV_COLUMNS = ("task_id", "method", "metric", "mean", "std", "n_units")


class PlanTask(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    task_id: str
    manifest: Path = Field(description="Cache manifest written by preprocess")


class PlanMethod(BaseModel):
    """An encoder to benchmark: a checkpoint, or a random initialization."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(min_length=1)
    checkpoint: Path | None = None
    random_seed: int | None = None

    @model_validator(mode="after")
    def _one_source(self) -> "PlanMethod":
        if (self.checkpoint is None) == (self.random_seed is None):
            raise ValueError(
                f"method '{self.name}' needs exactly one of checkpoint, random_seed"
            )
        return self


class BenchmarkPlan(BaseModel):
    """Which tasks to run against which encoders.

    ``encoder`` is the architecture of randomly initialized methods and
    ``probe`` the probe optimizer; unset, the caller's settings apply.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    tasks: list[PlanTask] = Field(min_length=1)
    methods: list[PlanMethod] = Field(min_length=1)
    encoder: EncoderConfig | None = None
    probe: ProbeConfig | None = None

    @model_validator(mode="after")
    def _unique_methods(self) -> "BenchmarkPlan":
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate method names in {names}")
        return self


def load_plan(path: Path) -> BenchmarkPlan:
    """Read a TOML plan; relative paths resolve against the plan's directory.

    Raises:
        DataIOError: If the file cannot be read
        ConfigError: If it is not valid TOML or not a valid plan
    """
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("benchmark plan", f"{path}: {e}") from e

    base = path.parent
    for entry in data.get("tasks", []):
        if "manifest" in entry:
            entry["manifest"] = base / entry["manifest"]
    for entry in data.get("methods", []):
        if "checkpoint" in entry:
            entry["checkpoint"] = base / entry["checkpoint"]
    try:
        return BenchmarkPlan.model_validate(data)
    except ValidationError as e:
        raise ConfigError("benchmark plan", f"{path}: {e}") from e


class ResultRecord(BaseModel):
    """One metric for one (task, method), with its per-run or per-subject values."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    task_id: str
    method: str
    metric: Metric
    values: tuple[float, ...] = Field(min_length=1)
    units: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> "ResultRecord":
        if self.units and len(self.units) != len(self.values):
            raise ValueError(f"{len(self.units)} units for {len(self.values)} values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite {self.metric} for {self.task_id}")
        return self

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))

    @property
    def n_units(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BenchmarkFailure:
    task_id: str
    method: str
    reason: str


@dataclass
class BenchmarkResult:
    records: list[ResultRecord] = field(default_factory=list)
    failures: list[BenchmarkFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def record(self, task_id: str, method: str, metric: Metric) -> ResultRecord:
        for r in self.records:
            if (r.task_id, r.method, r.metric) == (task_id, method, metric):
                return r
        raise KeyError((task_id, method, metric))

    def method_table(self, tasks: dict[str, TaskSpec]) -> MethodTable:
        """Primary-metric means as a table for MRR ranking."""
        table = MethodTable()
        for r in self.records:
            task = tasks[r.task_id]
            if r.metric != task.metric:
                continue
            direction = (
                Direction.HIGHER_BETTER
                if r.metric == Metric.AUROC
                else Direction.LOWER_BETTER
            )
            table.add(r.task_id, r.method, r.mean, direction, task.group)
        return table


@dataclass(frozen=True)
class TaskData:
    """The clips of one task, their labels and the evaluation splits."""

    task: TaskSpec
    subset: Manifest
    plans: list[SplitPlan]
    labels: dict[str, Any]

    def clips(self, dsp_cfg: DspConfig | None = None) -> list[Spectrogram]:
        load = spectrogram_loader(self.subset, dsp_cfg or DspConfig())
        return [load(r) for r in self.subset.records]


def prepare_task(task: TaskSpec, manifest: Manifest) -> TaskData:
    """Select the task's clips and build leakage-checked splits (seed 0)."""
    subset = task_subset(manifest, task)
    plans = make_splits(subset, task.split, seed=0)
    for plan in plans:
        assert_no_leakage(plan, subset)
    labels = {r.id: r.labels[task.label_key] for r in subset.records}
    logger.info(
        "Task %s: %d clips, %d subjects, %d split(s)",
        task.task_id,
        len(subset),
        len(subset.subjects()),
        len(plans),
    )
    return TaskData(task=task, subset=subset, plans=plans, labels=labels)


def task_subset(manifest: Manifest, task: TaskSpec) -> Manifest:
    """Records of the task's source and modality that carry its label.

    An empty ``task.source`` accepts every dataset.

    Raises:
        InvalidInputError: If none do
    """
    subset = manifest.filter(
        lambda r: r.modality == task.modality
        and task.label_key in r.labels
        and (not task.source or r.source == task.source)
    )
    if not subset.records:
        origin = task.source or "any"
        raise InvalidInputError(
            "manifest",
            f"no {origin} {task.modality} clips labelled '{task.label_key}' "
            f"for {task.task_id}",
        )
    return subset


def _fixed_split_runs(
    task: TaskSpec,
    plan: SplitPlan,
    features: FeatureSet,
    labels: dict[str, Any],
    probe_cfg: ProbeConfig,
) -> dict[Metric, list[tuple[str, float]]]:
    """Train ``n_runs`` probes with seeds ``0..n_runs-1`` on one split."""
    train_y = [labels[i] for i in plan.train]
    test_x, test_y = features.rows(plan.test), [labels[i] for i in plan.test]
    val = (features.rows(plan.val), [labels[i] for i in plan.val]) if plan.val else None
    values: dict[Metric, list[tuple[str, float]]] = {task.metric: []}
    for seed in range(task.n_runs):
        probe = train_probe(
            features.rows(plan.train), train_y, task, seed=seed, cfg=probe_cfg, val=val
        )
        values[task.metric].append((f"run{seed}", probe.score(test_x, test_y)))
    return values


def _loso_runs(
    task: TaskSpec,
    plans: Sequence[SplitPlan],
    features: FeatureSet,
    labels: dict[str, Any],
    probe_cfg: ProbeConfig,
) -> dict[Metric, list[tuple[str, float]]]:
    """One probe per held-out subject; MAPE too when no target is zero."""
    with_mape = all(float(v) != 0.0 for v in labels.values())
    values: dict[Metric, list[tuple[str, float]]] = {task.metric: []}
    if with_mape and task.metric != Metric.MAPE:
        values[Metric.MAPE] = []
    for plan in plans:
        probe = train_probe(
            features.rows(plan.train),
            [labels[i] for i in plan.train],
            task,
            seed=0,
            cfg=probe_cfg,
        )
        test_x, test_y = features.rows(plan.test), [labels[i] for i in plan.test]
        for metric in values:
            values[metric].append(
                (str(plan.fold), probe.score(test_x, test_y, metric))
            )
    return values


def probe_records(
    data: TaskData,
    features: FeatureSet,
    method: str,
    probe_cfg: ProbeConfig | None = None,
) -> list[ResultRecord]:
    """Probe ``features`` on every split of the task.

    Fixed-split tasks report one value per probe seed, leave-one-subject-out
    tasks one value per held-out subject.
    """
    task, cfg = data.task, probe_cfg or ProbeConfig()
    if task.split == SplitStrategy.LOSO:
        values = _loso_runs(task, data.plans, features, data.labels, cfg)
    else:
        values = _fixed_split_runs(task, data.plans[0], features, data.labels, cfg)
    return [
        ResultRecord(
            task_id=task.task_id,
            method=method,
            metric=metric,
            values=tuple(v for _, v in pairs),
            units=tuple(u for u, _ in pairs),
        )
        for metric, pairs in values.items()
    ]


def finetune_records(
    data: TaskData,
    clips: Sequence[Spectrogram],
    encoder: Encoder,
    cfg: FinetuneConfig | None = None,
) -> ResultRecord:
    """Fine-tune on every split of the task and score the test partition.

    Fixed-split tasks train with seeds ``0..n_runs-1``, leave-one-subject-out
    tasks once per held-out subject with ``cfg.seed``.
    """
    task, cfg = data.task, cfg or FinetuneConfig()
    by_id = dict(zip((r.id for r in data.subset.records), clips, strict=True))
    if task.split == SplitStrategy.LOSO:
        runs = [(str(plan.fold), plan, cfg) for plan in data.plans]
    else:
        runs = [
            (f"run{seed}", data.plans[0], cfg.model_copy(update={"seed": seed}))
            for seed in range(task.n_runs)
        ]
    values = []
    for _, plan, run_cfg in runs:
        result = finetune(
            encoder,
            None,
            [by_id[i] for i in plan.train],
            [data.labels[i] for i in plan.train],
            task,
            run_cfg,
        )
        test = [by_id[i] for i in plan.test]
        values.append(
            result.score(test, [data.labels[i] for i in plan.test], task.metric)
        )
    return ResultRecord(
        task_id=task.task_id,
        method="finetune",
        metric=task.metric,
        values=tuple(values),
        units=tuple(unit for unit, _, _ in runs),
    )


def evaluate_task(
    task: TaskSpec,
    manifest: Manifest,
    encoders: dict[str, Encoder],
    dsp_cfg: DspConfig | None = None,
    probe_cfg: ProbeConfig | None = None,
    threads: int = 1,
) -> BenchmarkResult:
    """Extract features with every encoder and probe them on one task.

    A failing method is recorded and the remaining methods still run.
    """
    data = prepare_task(task, manifest)
    clips = data.clips(dsp_cfg)
    result = BenchmarkResult()
    for name, encoder in encoders.items():
        try:
            features = extract_features(encoder, clips, task, threads)
            result.records.extend(probe_records(data, features, name, probe_cfg))
        except OperaError as e:
            logger.error("Task %s failed for %s: %s", task.task_id, name, e)
            result.failures.append(BenchmarkFailure(task.task_id, name, str(e)))
    return result


def load_encoders(
    plan: BenchmarkPlan,
    result: BenchmarkResult,
    encoder_cfg: EncoderConfig | None = None,
) -> dict[str, Encoder]:
    encoders: dict[str, Encoder] = {}
    for method in plan.methods:
        try:
            if method.checkpoint is not None:
                encoder = EncoderCheckpoint.load(method.checkpoint).build_encoder()
            else:
                architecture = plan.encoder or encoder_cfg or EncoderConfig()
                rng = np.random.default_rng(method.random_seed)
                encoder = build_encoder(architecture, rng)
        except OperaError as e:
            logger.error("Cannot load method %s: %s", method.name, e)
            result.failures.append(BenchmarkFailure("*", method.name, str(e)))
            continue
        encoders[method.name] = encoder
    return encoders


def results_csv(records: Sequence[ResultRecord]) -> str:
    """CSV text with fixed six-decimal formatting and ``\\n`` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [r.task_id, r.method, r.metric, f"{r.mean:.6f}", f"{r.std:.6f}", r.n_units]
        )
    return buffer.getvalue()


def write_results_csv(records: Sequence[ResultRecord], path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(results_csv(records), encoding="utf-8", newline="")
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    logger.info("Wrote %d result rows to %s", len(records), path)


def run_benchmark(
    plan: BenchmarkPlan,
    out_dir: Path,
    dsp_cfg: DspConfig | None = None,
    threads: int = 1,
    probe_cfg: ProbeConfig | None = None,
    encoder_cfg: EncoderConfig | None = None,
) -> BenchmarkResult:
    """Run every plan task against every plan method and write the reports.

    Writes ``results.csv`` and ``report.md`` under ``out_dir``. A failing
    task or method is recorded in the result and the run goes on.
    """
    result = BenchmarkResult()
    encoders = load_encoders(plan, result, encoder_cfg)
    probe_cfg = plan.probe or probe_cfg
    tasks: dict[str, TaskSpec] = {}
    for entry in plan.tasks:
        try:
            task = get_task(entry.task_id)
            tasks[task.task_id] = task
            manifest = load_manifest(entry.manifest)
            partial = evaluate_task(
                task, manifest, encoders, dsp_cfg, probe_cfg, threads
            )
        except OperaError as e:
            logger.error("Task %s failed: %s", entry.task_id, e)
            result.failures.append(BenchmarkFailure(entry.task_id, "*", str(e)))
            continue
        result.records.extend(partial.records)
        result.failures.extend(partial.failures)

    write_results_csv(result.records, out_dir / RESULTS_NAME)
    write_report(result, tasks, out_dir / REPORT_NAME)
    if result.failures:
        logger.warning("Benchmark finished with %d failure(s)", len(result.failures))
    return result
