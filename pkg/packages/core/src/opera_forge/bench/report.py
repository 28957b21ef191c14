"""Markdown benchmark report rendered from a jinja2 template."""

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateNotFound

from opera_forge.bench.ranking import mrr_report
from opera_forge.bench.tasks import TaskSpec
from opera_forge.core.exceptions import (
    CompletenessError,
    DataIOError,
    TemplateRenderError,
)
from opera_forge.core.types import Metric

if TYPE_CHECKING:
    from opera_forge.bench.runner import BenchmarkResult

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / "templates"
TEMPLATE_NAME = "report.md.j2"

_HEADINGS = {
    "health": "Health condition inference",
    "lung": "Lung function estimation",
    "synthetic": "Synthetic tasks",
}


def _environment() -> Environment:
    # Markdown output, so no autoescaping
    return Environment(  # nosec B701
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
    )


def _group_sections(
    result: "BenchmarkResult", tasks: dict[str, TaskSpec]
) -> list[dict[str, Any]]:
    """One table per task group: tasks as rows, methods as columns."""
    methods = list(dict.fromkeys(r.method for r in result.records))
    sections: dict[str, dict[str, Any]] = {}
    for task_id, task in tasks.items():
        records = {
            r.method: r
            for r in result.records
            if r.task_id == task_id and r.metric == task.metric
        }
        if not records:
            continue
        means = [r.mean for r in records.values()]
        best = max(means) if task.metric == Metric.AUROC else min(means)
        cells = []
        for method in methods:
            record = records.get(method)
            if record is None:
                cells.append({"text": "n/a", "best": False})
                continue
            cells.append(
                {
                    "text": f"{record.mean:.3f} ± {record.std:.3f}",
                    "best": record.mean == best,
                }
            )
        section = sections.setdefault(
            task.group,
            {
                "title": _HEADINGS.get(task.group, task.group),
                "methods": methods,
                "rows": [],
            },
        )
        section["rows"].append(
            {
                "task_id": task_id,
                "description": task.description,
                "metric": str(task.metric).upper(),
                "cells": cells,
            }
        )
    return list(sections.values())


def _mrr_rows(
    result: "BenchmarkResult", tasks: dict[str, TaskSpec]
) -> tuple[list[str], list[dict[str, Any]]]:
    table = result.method_table(tasks)
    if len(table.methods) < 2:
        return [], []
    try:
        report = mrr_report(table)
    except CompletenessError as e:
        logger.info("Skipping MRR in report: %s", e)
        return [], []
    rows = [
        {"method": m, "scores": [f"{s[g]:.4f}" for g in report.groups]}
        for m, s in report.scores.items()
    ]
    return report.groups, rows


def render_report(result: "BenchmarkResult", tasks: dict[str, TaskSpec]) -> str:
    """Render the markdown report for a benchmark run.

    Raises:
        TemplateRenderError: If the template is missing or fails
    """
    groups, mrr_rows = _mrr_rows(result, tasks)
    try:
        template = _environment().get_template(TEMPLATE_NAME)
        return template.render(
            sections=_group_sections(result, tasks),
            mrr_groups=groups,
            mrr_rows=mrr_rows,
            failures=result.failures,
            n_records=len(result.records),
        )
    except TemplateNotFound as e:
        raise TemplateRenderError(TEMPLATE_NAME, "Template not found") from e
    except Exception as e:
        raise TemplateRenderError(TEMPLATE_NAME, str(e)) from e


def write_report(
    result: "BenchmarkResult", tasks: dict[str, TaskSpec], path: Path
) -> None:
    content = render_report(result, tasks)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    logger.info("Wrote report to %s", path)
