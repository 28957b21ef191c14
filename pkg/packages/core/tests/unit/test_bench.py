"""Tests for metrics, ranking, probes, transfer, fine-tuning and reports."""

import numpy as np
import pytest

from opera_forge.bench.features import FeatureSet
from opera_forge.bench.finetune import FinetuneConfig, finetune, is_frozen
from opera_forge.bench.metrics import (
    auroc,
    auroc_multiclass,
    mae,
    mape,
    paired_ttest,
    welch_ttest,
)
from opera_forge.bench.probe import ProbeConfig, ProbeModel, train_probe
from opera_forge.bench.ranking import (
    MethodTable,
    competition_ranks,
    fixture_path,
    mrr,
    mrr_report,
    reproduce_mrr_fixture,
)
from opera_forge.bench.report import render_report
from opera_forge.bench.runner import (
    BenchmarkFailure,
    BenchmarkResult,
    ResultRecord,
    TaskData,
    finetune_records,
    load_plan,
    results_csv,
    task_subset,
)
from opera_forge.bench.tasks import CATALOG, TaskSpec, get_task
from opera_forge.bench.transfer import zero_shot
from opera_forge.core.exceptions import (
    CompletenessError,
    ConfigError,
    ContractError,
    DataIOError,
    InvalidInputError,
    ShapeError,
)
from opera_forge.core.types import Direction, Modality, PadPolicy, SplitStrategy
from opera_forge.data.manifest import ClipRecord, Manifest
from opera_forge.data.splits import SplitPlan
from opera_forge.models.checkpoint import build_encoder

BINARY = TaskSpec(task_id="toy", kind="binary", n_runs=1)
REGRESSION = TaskSpec(task_id="toy-rate", kind="regression", split="loso")
FAST_PROBE = ProbeConfig(lr=0.05, epochs=150, batch_size=16)


def _brute_force_auroc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels, strict=True) if y]
    neg = [s for s, y in zip(scores, labels, strict=True) if not y]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def _separable(n: int = 40, seed: int = 0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    x = rng.normal(size=(n, 3)).astype(np.float32)
    x[:, 0] += np.where(labels == 1, 4.0, -4.0)
    return x, labels


class TestAuroc:
    """Tests for rank-based AUROC."""

    def test_matches_pairwise_counting(self):
        """Test agreement with brute-force pair counting, ties included."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            n_pos, n_neg = rng.integers(1, 9, size=2)
            labels = np.array([1] * n_pos + [0] * n_neg)
            scores = rng.integers(0, 5, size=labels.size).astype(float)
            assert auroc(scores, labels) == pytest.approx(
                _brute_force_auroc(scores, labels), abs=1e-12
            )

    def test_complement(self):
        """Test flipping labels gives one minus the AUROC."""
        scores = np.array([0.1, 0.4, 0.35, 0.8, 0.4])
        labels = np.array([0, 0, 1, 1, 1])
        assert auroc(scores, labels) + auroc(scores, 1 - labels) == pytest.approx(1.0)

    def test_monotone_invariance(self):
        """Test a strictly increasing transform leaves AUROC unchanged."""
        scores = np.array([0.2, -1.0, 0.7, 0.3, 1.5, 0.0])
        labels = np.array([0, 0, 1, 0, 1, 1])
        assert auroc(np.exp(3 * scores), labels) == auroc(scores, labels)

    def test_single_class(self):
        """Test AUROC needs both classes."""
        with pytest.raises(InvalidInputError):
            auroc(np.array([0.1, 0.2]), np.array([1, 1]))

    def test_multiclass_perfect(self):
        """Test macro one-vs-rest AUROC of a perfect scorer."""
        labels = np.array([0, 1, 2, 0, 1, 2])
        probs = np.eye(3)[labels] * 0.8 + 0.1
        assert auroc_multiclass(probs, labels) == 1.0


class TestRegressionMetrics:
    """Tests for MAE and MAPE."""

    def test_values(self):
        """Test MAE and MAPE on a small example."""
        pred, y = np.array([1.0, 3.0]), np.array([2.0, 2.0])
        assert mae(pred, y) == 1.0
        assert mape(pred, y) == 0.5

    def test_mape_zero_target(self):
        """Test MAPE refuses zero targets."""
        with pytest.raises(InvalidInputError):
            mape(np.array([1.0]), np.array([0.0]))

    def test_shape_mismatch(self):
        """Test lengths must agree."""
        with pytest.raises(ShapeError):
            mae(np.ones(3), np.ones(2))


class TestTTests:
    """Tests for Welch and paired t-tests."""

    def test_welch_reference_value(self):
        """Test t = -1 with 8 degrees of freedom."""
        result = welch_ttest(np.arange(1.0, 6.0), np.arange(2.0, 7.0))
        assert result.t == pytest.approx(-1.0)
        assert result.df == pytest.approx(8.0)
        assert result.p == pytest.approx(0.3466, abs=1e-3)

    def test_zero_variance(self):
        """Test constant samples give p = 1 when equal and p = 0 otherwise."""
        assert welch_ttest(np.ones(3), np.ones(4)).p == 1.0
        assert welch_ttest(np.ones(3), np.full(3, 2.0)).p == 0.0

    def test_needs_two_values(self):
        """Test a single observation is rejected."""
        with pytest.raises(InvalidInputError):
            welch_ttest(np.ones(1), np.ones(3))

    def test_paired_constant_difference(self):
        """Test constant per-unit differences give p = 0."""
        result = paired_ttest(np.array([1.0, 2.0, 3.0]), np.array([0.5, 1.5, 2.5]))
        assert result.p == 0.0
        assert result.df == 2.0


class TestRanking:
    """Tests for competition ranks and mean reciprocal rank."""

    def test_competition_ranks(self):
        """Test ties share the best rank and the next rank is skipped."""
        values = {"a": 0.9, "b": 0.9, "c": 0.8}
        assert competition_ranks(values, Direction.HIGHER_BETTER) == {
            "a": 1,
            "b": 1,
            "c": 3,
        }
        assert competition_ranks(values, Direction.LOWER_BETTER) == {
            "a": 2,
            "b": 2,
            "c": 1,
        }

    def test_mrr(self):
        """Test MRR averages reciprocal ranks over tasks."""
        table = MethodTable()
        table.add("t1", "x", 0.9, Direction.HIGHER_BETTER)
        table.add("t1", "y", 0.8, Direction.HIGHER_BETTER)
        table.add("t2", "x", 2.0, Direction.LOWER_BETTER)
        table.add("t2", "y", 1.0, Direction.LOWER_BETTER)
        assert mrr(table) == {"x": 0.75, "y": 0.75}

    def test_missing_cell(self):
        """Test an incomplete table names the missing cell."""
        table = MethodTable()
        table.add("t1", "x", 0.9, Direction.HIGHER_BETTER)
        table.add("t2", "y", 0.8, Direction.HIGHER_BETTER)
        with pytest.raises(CompletenessError) as exc_info:
            mrr(table)
        assert (exc_info.value.task_id, exc_info.value.method) == ("t1", "y")

    def test_conflicting_direction(self):
        """Test a task cannot be ranked both ways."""
        table = MethodTable()
        table.add("t1", "x", 0.9, Direction.HIGHER_BETTER)
        with pytest.raises(InvalidInputError):
            table.add("t1", "y", 0.8, Direction.LOWER_BETTER)

    def test_fixture_reproduces(self):
        """Test the shipped result tables give the expected MRR per group."""
        report = reproduce_mrr_fixture()
        assert report.ok, report.failures
        assert report.groups == ["all", "health", "lung"]
        assert report.scores["OPERA-CT"]["all"] == pytest.approx(0.5632, abs=5e-4)
        assert report.scores["OPERA-CT"]["health"] == pytest.approx(0.6944, abs=5e-4)
        assert report.scores["OPERA-GT"]["lung"] == pytest.approx(0.6548, abs=5e-4)
        assert report.scores["CLAP"]["lung"] == pytest.approx(0.1918, abs=5e-4)

    def test_fixture_without_a_cell(self, tmp_path):
        """Test a fixture missing one cell fails with CompletenessError."""
        lines = fixture_path("paper_tables.csv").read_text().splitlines()
        dropped = "T1,health,higher_better,CLAP,"
        kept = [line for line in lines if not line.startswith(dropped)]
        broken = tmp_path / "tables.csv"
        broken.write_text("\n".join(kept) + "\n")
        with pytest.raises(CompletenessError):
            reproduce_mrr_fixture(fixture=broken)

    def test_report_groups(self):
        """Test groups come from the table in first-seen order."""
        table = MethodTable()
        table.add("a", "x", 1.0, Direction.HIGHER_BETTER, "lung")
        table.add("a", "y", 0.0, Direction.HIGHER_BETTER, "lung")
        report = mrr_report(table)
        assert report.groups == ["all", "lung"]
        assert report.scores["y"]["lung"] == 0.5


class TestTasks:
    """Tests for task definitions."""

    def test_catalog_defaults(self):
        """Test classification repeats and regression zero-pads."""
        assert CATALOG["T1"].pad_policy == PadPolicy.REPEAT
        assert CATALOG["T13"].pad_policy == PadPolicy.ZERO
        assert CATALOG["T13"].split == SplitStrategy.LOSO
        assert CATALOG["T11"].n_classes == 5
        assert all(t.l2 == 1e-5 for t in CATALOG.values())

    def test_unknown_task(self):
        """Test unknown ids list the catalog."""
        with pytest.raises(ConfigError, match="T19"):
            get_task("T99")

    def test_regression_metric(self):
        """Test regression tasks cannot be scored by AUROC."""
        with pytest.raises(ValueError):
            TaskSpec(task_id="x", kind="regression", metric="auroc")

    def test_subset_keeps_one_dataset(self, tmp_path):
        """Test tasks sharing modality and label do not pool datasets."""
        records = tuple(
            ClipRecord(
                id=f"{source}-{i}",
                path=tmp_path / f"{source}-{i}.wav",
                subject_id=f"{source}-s{i}",
                source=source,
                modality=Modality.COUGH,
                labels={"sex": i % 2},
            )
            for source in ("coughvid", "coswara")
            for i in range(2)
        )
        manifest = Manifest(records=records)

        t6 = task_subset(manifest, CATALOG["T6"])
        t9 = task_subset(manifest, CATALOG["T9"])

        assert {r.source for r in t6.records} == {"coughvid"}
        assert {r.source for r in t9.records} == {"coswara"}
        assert len(t6) == len(t9) == 2

    def test_subset_without_source_pools(self, tmp_path):
        """Test a task with no source accepts every dataset."""
        records = tuple(
            ClipRecord(
                id=f"{source}-0",
                path=tmp_path / f"{source}.wav",
                subject_id=f"{source}-s0",
                source=source,
                modality=Modality.COUGH,
                labels={"sex": 1},
            )
            for source in ("coughvid", "coswara")
        )
        task = TaskSpec(
            task_id="pooled", kind="binary", modality="cough", label_key="sex"
        )

        assert len(task_subset(Manifest(records=records), task)) == 2

    def test_subset_missing_source(self, tmp_path):
        """Test a manifest without the task's dataset is rejected."""
        record = ClipRecord(
            id="a",
            path=tmp_path / "a.wav",
            subject_id="s",
            source="coswara",
            modality=Modality.COUGH,
            labels={"sex": 0},
        )
        with pytest.raises(InvalidInputError, match="coughvid"):
            task_subset(Manifest(records=(record,)), CATALOG["T6"])


class TestProbe:
    """Tests for linear probes."""

    def test_separable(self):
        """Test a separable toy set reaches training AUROC 1."""
        x, y = _separable()
        probe = train_probe(x, y, BINARY, cfg=FAST_PROBE)
        assert probe.score(x, y) == 1.0
        assert probe.classes == (0, 1)

    def test_deterministic(self):
        """Test the same seed gives identical weights."""
        x, y = _separable()
        a = train_probe(x, y, BINARY, seed=3, cfg=FAST_PROBE)
        b = train_probe(x, y, BINARY, seed=3, cfg=FAST_PROBE)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_regression(self):
        """Test a linear target is fit far better than the mean predictor."""
        rng = np.random.default_rng(0)
        x = rng.normal(size=(60, 2)).astype(np.float32)
        y = 3.0 * x[:, 0] + 10.0
        probe = train_probe(x, y, REGRESSION, cfg=ProbeConfig(lr=0.05, epochs=200))
        baseline = mae(np.full_like(y, y.mean()), y)
        assert probe.score(x, y) < 0.2 * baseline

    def test_single_class(self):
        """Test classification needs two classes in training."""
        with pytest.raises(InvalidInputError):
            train_probe(np.ones((4, 2)), np.zeros(4, dtype=int), BINARY)

    def test_archive(self):
        """Test a stored probe predicts like the original."""
        x, y = _separable()
        probe = train_probe(x, y, BINARY, cfg=ProbeConfig(epochs=5))
        loaded = ProbeModel.from_bytes(probe.to_bytes())
        np.testing.assert_allclose(loaded.predict(x), probe.predict(x))
        assert loaded.classes == probe.classes
        assert loaded.task_id == "toy"


class TestZeroShot:
    """Tests for probe transfer across tasks."""

    def test_flipped_labels(self):
        """Test a task with flipped labels scores one minus the AUROC."""
        x, y = _separable(seed=2)
        x[:, 0] *= 0.05
        probe = train_probe(x, y, BINARY, cfg=ProbeConfig(epochs=3))
        features = FeatureSet(ids=tuple(f"c{i}" for i in range(len(y))), values=x)
        target = TaskSpec(task_id="flipped", kind="binary")

        straight = zero_shot(probe, features, y, BINARY)
        flipped = zero_shot(probe, features, 1 - y, target)
        assert straight + flipped == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        """Test features must match the probe's input size."""
        x, y = _separable()
        probe = train_probe(x, y, BINARY, cfg=ProbeConfig(epochs=1))
        with pytest.raises(ShapeError):
            zero_shot(probe, x[:, :2], y, BINARY)

    def test_label_space(self):
        """Test kind and class mismatches are rejected."""
        x, y = _separable()
        probe = train_probe(x, y, BINARY, cfg=ProbeConfig(epochs=1))
        with pytest.raises(ContractError):
            zero_shot(probe, x, y.astype(float), REGRESSION)
        with pytest.raises(ContractError):
            zero_shot(probe, x, y + 5, BINARY)


class TestFinetune:
    """Tests for joint encoder and head training."""

    @pytest.fixture
    def clips(self, make_spec):
        return [make_spec(20, seed=i, source_id=f"c{i}") for i in range(8)]

    def test_is_frozen(self):
        """Test prefixes match whole name components."""
        assert is_frozen("encoder.conv1.weight", ["encoder.conv1"])
        assert not is_frozen("encoder.conv10.weight", ["encoder.conv1"])

    def test_frozen_encoder(self, tiny_vit_cfg, clips):
        """Test a frozen encoder keeps its weights while the head trains."""
        encoder = build_encoder(tiny_vit_cfg, np.random.default_rng(0))
        before = encoder.state_dict()
        cfg = FinetuneConfig(epochs=2, batch_size=4, lr=1e-2, frozen=("encoder",))
        result = finetune(encoder, None, clips, np.arange(8) % 2, BINARY, cfg)

        assert result.trainable == ("head.weight", "head.bias")
        for name, value in result.encoder.state_dict().items():
            np.testing.assert_array_equal(value, before[name])
        assert len(result.losses) == 2
        assert result.predict(clips).shape == (8, 2)

    def test_inputs_untouched(self, tiny_vit_cfg, clips):
        """Test fine-tuning updates a copy of the encoder."""
        encoder = build_encoder(tiny_vit_cfg, np.random.default_rng(0))
        before = encoder.state_dict()
        cfg = FinetuneConfig(epochs=1, batch_size=4, lr=1e-2)
        result = finetune(encoder, None, clips, np.arange(8) % 2, BINARY, cfg)
        for name, value in encoder.state_dict().items():
            np.testing.assert_array_equal(value, before[name])
        changed = [
            not np.array_equal(v, before[n])
            for n, v in result.encoder.state_dict().items()
        ]
        assert any(changed)

    def test_everything_frozen(self, tiny_vit_cfg, clips):
        """Test freezing every parameter is a configuration error."""
        encoder = build_encoder(tiny_vit_cfg, np.random.default_rng(0))
        cfg = FinetuneConfig(epochs=1, frozen=("encoder", "head"))
        with pytest.raises(ConfigError):
            finetune(encoder, None, clips, np.arange(8) % 2, BINARY, cfg)

    def test_records_one_per_seed(self, tiny_vit_cfg, clips, tmp_path):
        """Test a fixed-split task is fine-tuned once per run seed."""
        ids = [c.source_id for c in clips]
        records = tuple(
            ClipRecord(
                id=i,
                path=tmp_path / f"{i}.opsg",
                subject_id=f"s{n}",
                source="synth",
                modality=Modality.BREATH,
                labels={"label": n % 2},
            )
            for n, i in enumerate(ids)
        )
        plan = SplitPlan(
            train=tuple(ids[:6]),
            val=(),
            test=tuple(ids[6:]),
            strategy=SplitStrategy.PARTICIPANT_INDEPENDENT,
        )
        task = TaskSpec(task_id="toy", kind="binary", n_runs=2)
        data = TaskData(
            task=task,
            subset=Manifest(records=records),
            plans=[plan],
            labels={r.id: r.labels["label"] for r in records},
        )
        encoder = build_encoder(tiny_vit_cfg, np.random.default_rng(0))

        record = finetune_records(
            data, clips, encoder, FinetuneConfig(epochs=1, batch_size=4, seed=9)
        )

        assert record.method == "finetune"
        assert record.units == ("run0", "run1")
        assert record.n_units == task.n_runs


class TestResults:
    """Tests for result records, CSV output and plans."""

    def _records(self):
        return [
            ResultRecord(
                task_id="T1", method="a", metric="auroc", values=(0.8, 0.8)
            ),
            ResultRecord(
                task_id="T1", method="b", metric="auroc", values=(0.6, 0.7)
            ),
        ]

    def test_csv(self):
        """Test fixed formatting and a stable column order."""
        text = results_csv(self._records())
        assert text.splitlines() == [
            "task_id,method,metric,mean,std,n_units",
            "T1,a,auroc,0.800000,0.000000,2",
            "T1,b,auroc,0.650000,0.050000,2",
        ]
        assert results_csv(self._records()) == text

    def test_record_checks(self):
        """Test non-finite values and unit mismatches are rejected."""
        with pytest.raises(ValueError):
            ResultRecord(task_id="T1", method="a", metric="mae", values=(np.nan,))
        with pytest.raises(ValueError):
            ResultRecord(
                task_id="T1", method="a", metric="mae", values=(1.0,), units=("a", "b")
            )

    def test_report(self):
        """Test the report bolds the best method and includes MRR."""
        result = BenchmarkResult(
            records=self._records(),
            failures=[BenchmarkFailure("T2", "b", "no clips")],
        )
        text = render_report(result, {"T1": CATALOG["T1"]})
        assert "## Health condition inference" in text
        assert "**0.800 ± 0.000**" in text
        assert "0.650 ± 0.050 |" in text
        assert "## Mean reciprocal rank" in text
        assert "| a | 1.0000 | 1.0000 |" in text
        assert "| b | 0.5000 | 0.5000 |" in text
        assert "- `T2` / `b`: no clips" in text

    def test_load_plan(self, tmp_path):
        """Test relative paths resolve against the plan's directory."""
        plan_file = tmp_path / "plan.toml"
        plan_file.write_text(
            '[[tasks]]\ntask_id = "synth-rate"\nmanifest = "cache/manifest.jsonl"\n'
            '[[methods]]\nname = "random"\nrandom_seed = 0\n'
            '[[methods]]\nname = "pretrained"\ncheckpoint = "ck.opck"\n'
        )
        plan = load_plan(plan_file)
        assert plan.tasks[0].manifest == tmp_path / "cache" / "manifest.jsonl"
        assert plan.methods[1].checkpoint == tmp_path / "ck.opck"

    @pytest.mark.parametrize(
        "body",
        [
            "not toml [",
            '[[tasks]]\ntask_id = "T1"\nmanifest = "m"\n'
            '[[methods]]\nname = "x"\nrandom_seed = 0\ncheckpoint = "c"\n',
            '[[tasks]]\ntask_id = "T1"\nmanifest = "m"\n'
            '[[methods]]\nname = "x"\nrandom_seed = 0\n'
            '[[methods]]\nname = "x"\nrandom_seed = 1\n',
        ],
    )
    def test_invalid_plan(self, tmp_path, body):
        """Test malformed plans raise ConfigError."""
        plan_file = tmp_path / "plan.toml"
        plan_file.write_text(body)
        with pytest.raises(ConfigError):
            load_plan(plan_file)

    def test_missing_plan(self, tmp_path):
        """Test an unreadable plan raises DataIOError."""
        with pytest.raises(DataIOError):
            load_plan(tmp_path / "absent.toml")


def test_features_rows_order():
    """Feature rows come back in the requested order."""
    features = FeatureSet(ids=("a", "b"), values=np.array([[1.0], [2.0]]))
    np.testing.assert_array_equal(features.rows(["b", "a"]), [[2.0], [1.0]])
    with pytest.raises(InvalidInputError):
        features.rows(["c"])


def test_probe_seeds_differ():
    """Different probe seeds start from different weights."""
    x, y = _separable()
    weights = [
        train_probe(x, y, BINARY, seed=s, cfg=ProbeConfig(epochs=1)).weights
        for s in range(2)
    ]
    assert not np.array_equal(*weights)
