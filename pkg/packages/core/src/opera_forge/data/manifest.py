"""Clip manifests: one JSON record per line.

An optional first line ``{"manifest": {...}}`` carries the normalization
constants and a provenance note. Relative audio paths resolve against the
manifest's directory.
"""

import json
import logging
import math
from collections.abc import Callable
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from opera_forge.core.exceptions import (
    DataIOError,
    DuplicateIdError,
    MalformedRecordError,
    MissingAudioError,
)
from opera_forge.core.types import Modality

logger = logging.getLogger(__name__)

HEADER_KEY = "manifest"

LabelValue = float | int | str


class ClipRecord(BaseModel):
    """One audio clip and what is known about it."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    id: str = Field(min_length=1, description="Unique within the manifest")
    path: Path = Field(description="Audio (or cached spectrogram) file")
    subject_id: str = Field(min_length=1, description="Participant identifier")
    source: str = Field(min_length=1, description="Dataset name")
    modality: Modality
    labels: dict[str, LabelValue] = Field(default_factory=dict)
    duration_s: float = Field(default=0.0, ge=0.0)
    split: str | None = Field(
        default=None, description="Official partition: train, val or test"
    )

    @property
    def group(self) -> tuple[str, Modality]:
        return self.source, self.modality


class ManifestHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    norm_mean: float = 0.0
    norm_std: float = 1.0
    provenance: str = ""


class Manifest(BaseModel):
    """An immutable clip inventory plus corpus normalization constants."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    records: tuple[ClipRecord, ...] = ()
    norm_mean: float = 0.0
    norm_std: float = 1.0
    provenance: str = ""

    @model_validator(mode="after")
    def _check(self) -> "Manifest":
        if not (math.isfinite(self.norm_mean) and math.isfinite(self.norm_std)):
            raise ValueError("normalization constants must be finite")
        if self.norm_std <= 0.0:
            raise ValueError(f"norm_std must be > 0, got {self.norm_std}")
        seen: set[str] = set()
        for record in self.records:
            if record.id in seen:
                raise ValueError(f"duplicate id '{record.id}'")
            seen.add(record.id)
        return self

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, ClipRecord]:
        return {r.id: r for r in self.records}

    def subjects(self) -> list[str]:
        return sorted({r.subject_id for r in self.records})

    def groups(self) -> list[tuple[str, Modality]]:
        return sorted({r.group for r in self.records})

    def filter(self, keep: Callable[[ClipRecord], bool]) -> "Manifest":
        kept = tuple(r for r in self.records if keep(r))
        return self.model_copy(update={"records": kept})


def _parse_line(text: str, line: int) -> dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedRecordError(line, f"invalid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise MalformedRecordError(line, "record must be a JSON object")
    return data


def _first_error(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(p) for p in first["loc"]) or "record"
    return f"{where}: {first['msg']}"


def load_manifest(path: Path, check_audio: bool = True) -> Manifest:
    """Read and validate a manifest.

    Args:
        path: Manifest file
        check_audio: Require every referenced file to exist

    Raises:
        DataIOError: If the manifest cannot be read
        MalformedRecordError: If a line is not a valid record
        DuplicateIdError: If an id repeats
        MissingAudioError: If a referenced file does not exist
    """
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e

    base = path.parent
    header = ManifestHeader()
    records: list[ClipRecord] = []
    first_seen: dict[str, int] = {}
    saw_content = False

    for number, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        data = _parse_line(text, number)
        if not saw_content and set(data) == {HEADER_KEY}:
            saw_content = True
            try:
                header = ManifestHeader.model_validate(data[HEADER_KEY])
            except ValidationError as e:
                raise MalformedRecordError(number, _first_error(e)) from e
            continue
        saw_content = True
        try:
            record = ClipRecord.model_validate(data)
        except ValidationError as e:
            raise MalformedRecordError(number, _first_error(e)) from e

        if record.id in first_seen:
            raise DuplicateIdError(record.id, number, first_seen[record.id])
        first_seen[record.id] = number

        resolved = record.path if record.path.is_absolute() else base / record.path
        if check_audio and not resolved.is_file():
            raise MissingAudioError(resolved, number)
        records.append(record.model_copy(update={"path": resolved}))

    if not records:
        logger.warning("Manifest %s holds no records", path)
    try:
        return Manifest(records=tuple(records), **header.model_dump())
    except ValidationError as e:
        raise MalformedRecordError(1, _first_error(e)) from e


def _relative(target: Path, base: Path) -> str:
    try:
        return target.resolve().relative_to(base.resolve()).as_posix()
    except ValueError:
        return str(target)


def write_manifest(manifest: Manifest, path: Path) -> None:
    """Write ``manifest`` with paths relative to ``path``'s directory where possible."""
    base = path.parent
    header = {
        HEADER_KEY: {
            "norm_mean": manifest.norm_mean,
            "norm_std": manifest.norm_std,
            "provenance": manifest.provenance,
        }
    }
    lines = [json.dumps(header, sort_keys=True)]
    for record in manifest.records:
        data = record.model_dump(mode="json", exclude_none=True)
        data["path"] = _relative(record.path, base)
        lines.append(json.dumps(data, sort_keys=True))
    try:
        base.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    logger.info("Wrote manifest with %d records to %s", len(manifest), path)
