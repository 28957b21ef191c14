"""Downstream task definitions and the shipped catalog."""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from opera_forge.core.exceptions import ConfigError
from opera_forge.core.types import Metric, Modality, PadPolicy, SplitStrategy, TaskKind


class TaskSpec(BaseModel):
    """How one downstream task is probed and scored.

    ``pad_policy`` defaults to repeat padding for classification and zero
    padding for regression.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    task_id: str = Field(min_length=1)
    description: str = ""
    group: str = Field(default="health", description="health, lung or synthetic")
    source: str = ""
    modality: Modality = Modality.BREATH
    kind: TaskKind
    n_classes: int | None = Field(default=None, description="K for classification")
    metric: Metric | None = None
    pad_policy: PadPolicy | None = None
    split: SplitStrategy = SplitStrategy.PARTICIPANT_INDEPENDENT
    label_key: str = "label"
    n_runs: int = Field(default=5, ge=1)
    l2: float = Field(default=1e-5, ge=0.0)

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data: object) -> object:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        kind = TaskKind(data.get("kind", TaskKind.BINARY))
        regression = kind == TaskKind.REGRESSION
        data.setdefault("metric", Metric.MAE if regression else Metric.AUROC)
        policy = PadPolicy.ZERO if regression else PadPolicy.REPEAT
        data.setdefault("pad_policy", policy)
        if kind == TaskKind.BINARY:
            data.setdefault("n_classes", 2)
        return data

    @model_validator(mode="after")
    def _check(self) -> "TaskSpec":
        if self.kind == TaskKind.REGRESSION:
            if self.metric not in (Metric.MAE, Metric.MAPE):
                raise ValueError(f"regression task scored by {self.metric}")
            if self.n_classes is not None:
                raise ValueError("regression tasks have no classes")
        else:
            if self.metric != Metric.AUROC:
                raise ValueError(f"classification task scored by {self.metric}")
            if self.n_classes is None or self.n_classes < 2:
                raise ValueError(f"need n_classes >= 2, got {self.n_classes}")
            if self.kind == TaskKind.BINARY and self.n_classes != 2:
                raise ValueError("binary tasks have exactly 2 classes")
            if self.split == SplitStrategy.LOSO:
                raise ValueError("leave-one-subject-out is for regression tasks")
        return self

    @property
    def is_classification(self) -> bool:
        return self.kind != TaskKind.REGRESSION


def _health(
    task_id: str,
    description: str,
    source: str,
    modality: Modality,
    label_key: str,
    split: SplitStrategy,
    n_classes: int = 2,
) -> TaskSpec:
    return TaskSpec(
        task_id=task_id,
        description=description,
        group="health",
        source=source,
        modality=modality,
        kind=TaskKind.BINARY if n_classes == 2 else TaskKind.MULTICLASS,
        n_classes=n_classes,
        split=split,
        label_key=label_key,
    )


def _lung(
    task_id: str, description: str, source: str, modality: Modality, label_key: str
) -> TaskSpec:
    return TaskSpec(
        task_id=task_id,
        description=description,
        group="lung",
        source=source,
        modality=modality,
        kind=TaskKind.REGRESSION,
        split=SplitStrategy.LOSO,
        label_key=label_key,
    )


_OFFICIAL = SplitStrategy.OFFICIAL
_INDEPENDENT = SplitStrategy.PARTICIPANT_INDEPENDENT
B, C, L, S, V = (
    Modality.BREATH,
    Modality.COUGH,
    Modality.LUNG,
    Modality.SNORE,
    Modality.VOWEL,
)

CATALOG: dict[str, TaskSpec] = {
    spec.task_id: spec
    for spec in (
        _health("T1", "Covid (exhalation)", "ukcovid", B, "covid", _OFFICIAL),
        _health("T2", "Covid (cough)", "ukcovid", C, "covid", _OFFICIAL),
        _health("T3", "Symptom (breath)", "covid19sounds", B, "symptomatic", _OFFICIAL),
        _health("T4", "Symptom (cough)", "covid19sounds", C, "symptomatic", _OFFICIAL),
        _health("T5", "Covid (cough)", "coughvid", C, "covid", _INDEPENDENT),
        _health("T6", "Sex (cough)", "coughvid", C, "sex", _INDEPENDENT),
        _health("T7", "COPD (lung)", "icbhi", L, "copd", _INDEPENDENT),
        _health("T8", "Smoker (cough)", "coswara", C, "smoker", _INDEPENDENT),
        _health("T9", "Sex (cough)", "coswara", C, "sex", _INDEPENDENT),
        _health("T10", "Obstructive (lung)", "kauh", L, "obstructive", _INDEPENDENT),
        _health(
            "T11",
            "COPD severity (lung)",
            "respiratorytr",
            L,
            "copd_severity",
            _INDEPENDENT,
            n_classes=5,
        ),
        _health(
            "T12",
            "Body position (snore)",
            "ssbpr",
            S,
            "body_position",
            _OFFICIAL,
            n_classes=5,
        ),
        _lung("T13", "FVC (breath)", "mmlung", B, "fvc"),
        _lung("T14", "FEV1 (breath)", "mmlung", B, "fev1"),
        _lung("T15", "FEV1/FVC (breath)", "mmlung", B, "fev1_fvc"),
        _lung("T16", "FVC (vowel)", "mmlung", V, "fvc"),
        _lung("T17", "FEV1 (vowel)", "mmlung", V, "fev1"),
        _lung("T18", "FEV1/FVC (vowel)", "mmlung", V, "fev1_fvc"),
        _lung("T19", "Respiratory rate (breath)", "nosemic", B, "respiratory_rate"),
        TaskSpec(
            task_id="synth-rate",
            description="Breathing rate (synthetic)",
            group="synthetic",
            source="synth",
            modality=B,
            kind=TaskKind.REGRESSION,
            split=SplitStrategy.LOSO,
            label_key="rate",
        ),
        TaskSpec(
            task_id="synth-wheeze",
            description="Wheeze (synthetic)",
            group="synthetic",
            source="synth",
            modality=B,
            kind=TaskKind.BINARY,
            split=_INDEPENDENT,
            label_key="wheeze",
        ),
    )
}


def get_task(task_id: str) -> TaskSpec:
    """Look up a catalog task.

    Raises:
        ConfigError: For an unknown id, listing the known ones
    """
    try:
        return CATALOG[task_id]
    except KeyError:
        known = ", ".join(CATALOG)
        raise ConfigError(
            "task", f"unknown task '{task_id}' (known: {known})"
        ) from None
