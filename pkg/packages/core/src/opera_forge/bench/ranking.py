"""Method tables and mean reciprocal rank aggregation."""

import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from opera_forge.core.exceptions import (
    CompletenessError,
    DataIOError,
    InvalidInputError,
)
from opera_forge.core.types import Direction

logger = logging.getLogger(__name__)

ALL_GROUP = "all"
DEFAULT_TOLERANCE = 5e-4


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("opera_forge.bench").joinpath("fixtures", name)))


@dataclass
class MethodTable:
    """Metric value per (task, method), with each task's direction and group.

    Tasks and methods keep first-seen order.
    """

    values: dict[tuple[str, str], float] = field(default_factory=dict)
    directions: dict[str, Direction] = field(default_factory=dict)
    groups: dict[str, str] = field(default_factory=dict)
    tasks: list[str] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)

    def add(
        self,
        task_id: str,
        method: str,
        value: float,
        direction: Direction,
        group: str = "",
    ) -> None:
        """Record one cell.

        Raises:
            InvalidInputError: On a non-finite value or a conflicting direction
        """
        if not math.isfinite(value):
            raise InvalidInputError("table value", f"{task_id}/{method} is {value}")
        known = self.directions.setdefault(task_id, direction)
        if known != direction:
            raise InvalidInputError(
                "table direction", f"{task_id} is both {known} and {direction}"
            )
        self.groups.setdefault(task_id, group)
        if task_id not in self.tasks:
            self.tasks.append(task_id)
        if method not in self.methods:
            self.methods.append(method)
        self.values[(task_id, method)] = value

    @classmethod
    def from_csv(cls, path: Path) -> "MethodTable":
        """Read ``task_id, group, direction, method, value`` rows."""
        table = cls()
        try:
            with path.open(newline="", encoding="utf-8") as f:
                for row in csv.DictReader(f):
                    table.add(
                        row["task_id"],
                        row["method"],
                        float(row["value"]),
                        Direction(row["direction"]),
                        row.get("group", ""),
                    )
        except OSError as e:
            raise DataIOError(str(path), str(e)) from e
        except (KeyError, ValueError) as e:
            raise InvalidInputError("method table", f"{path}: {e}") from e
        return table

    def tasks_in(self, group: str) -> list[str]:
        if group == ALL_GROUP:
            return list(self.tasks)
        return [t for t in self.tasks if self.groups.get(t) == group]

    def without(self, task_id: str, method: str) -> "MethodTable":
        """Copy with one cell removed."""
        values = {k: v for k, v in self.values.items() if k != (task_id, method)}
        return MethodTable(
            values=values,
            directions=dict(self.directions),
            groups=dict(self.groups),
            tasks=list(self.tasks),
            methods=list(self.methods),
        )


def competition_ranks(values: dict[str, float], direction: Direction) -> dict[str, int]:
    """``1 + number of strictly better values``; ties share the best rank."""
    if direction == Direction.HIGHER_BETTER:
        return {m: 1 + sum(o > v for o in values.values()) for m, v in values.items()}
    return {m: 1 + sum(o < v for o in values.values()) for m, v in values.items()}


def mrr(
    table: MethodTable,
    tasks: Sequence[str] | None = None,
    methods: Sequence[str] | None = None,
) -> dict[str, float]:
    """Mean over tasks of ``1 / rank`` for each method.

    Raises:
        CompletenessError: Naming the first missing (task, method) cell
    """
    tasks = list(tasks) if tasks is not None else list(table.tasks)
    methods = list(methods) if methods is not None else list(table.methods)
    for task_id in tasks:
        for method in methods:
            if (task_id, method) not in table.values:
                raise CompletenessError(task_id, method)
    if not tasks:
        return {m: 0.0 for m in methods}

    totals = dict.fromkeys(methods, 0.0)
    for task_id in tasks:
        row = {m: table.values[(task_id, m)] for m in methods}
        for method, rank in competition_ranks(row, table.directions[task_id]).items():
            totals[method] += 1.0 / rank
    return {m: totals[m] / len(tasks) for m in methods}


@dataclass(frozen=True)
class MrrCheck:
    method: str
    group: str
    expected: float
    actual: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return abs(self.actual - self.expected) <= self.tolerance


@dataclass
class MrrReport:
    """MRR per method and task group, optionally checked against expectations."""

    scores: dict[str, dict[str, float]]
    groups: list[str]
    checks: list[MrrCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list[MrrCheck]:
        return [c for c in self.checks if not c.ok]


def mrr_report(table: MethodTable, groups: Sequence[str] | None = None) -> MrrReport:
    """MRR for ``all`` plus every task group in the table."""
    if groups is None:
        seen = [g for g in dict.fromkeys(table.groups.values()) if g]
        groups = [ALL_GROUP, *seen]
    scores: dict[str, dict[str, float]] = {m: {} for m in table.methods}
    for group in groups:
        for method, value in mrr(table, table.tasks_in(group)).items():
            scores[method][group] = value
    return MrrReport(scores=scores, groups=list(groups))


def read_expected_mrr(path: Path) -> dict[str, dict[str, float]]:
    try:
        with path.open(newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    return {
        row["method"]: {k: float(v) for k, v in row.items() if k != "method"}
        for row in rows
    }


def reproduce_mrr_fixture(
    fixture: Path | None = None,
    expected: Path | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> MrrReport:
    """Recompute MRR from the shipped result tables and compare to expectations.

    Raises:
        CompletenessError: If the fixture lacks a (task, method) cell
    """
    table = MethodTable.from_csv(fixture or fixture_path("paper_tables.csv"))
    report = mrr_report(table)
    targets = read_expected_mrr(expected or fixture_path("expected_mrr.csv"))
    for method, by_group in targets.items():
        for group, value in by_group.items():
            actual = report.scores.get(method, {}).get(group, math.nan)
            report.checks.append(MrrCheck(method, group, value, actual, tolerance))
    for check in report.failures:
        logger.warning(
            "MRR mismatch for %s/%s: expected %.4f, got %.4f",
            check.method,
            check.group,
            check.expected,
            check.actual,
        )
    return report
