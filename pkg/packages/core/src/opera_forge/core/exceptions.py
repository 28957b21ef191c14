"""Exceptions raised by opera-forge.

Library code raises these; only the CLI turns them into exit codes.
"""

from pathlib import Path


class OperaError(Exception):
    """Base exception for all opera-forge errors."""

    pass


class InvalidInputError(OperaError):
    """Raised when input data violates a precondition (non-finite, too short)."""

    def __init__(self, what: str, reason: str):
        self.what = what
        self.reason = reason
        super().__init__(f"Invalid {what}: {reason}")


class ConfigError(OperaError):
    """Raised when a configuration value cannot be honoured."""

    def __init__(self, setting: str, reason: str):
        self.setting = setting
        self.reason = reason
        super().__init__(f"Invalid configuration '{setting}': {reason}")


class ShapeError(OperaError):
    """Raised when operand shapes are incompatible."""

    def __init__(
        self, op: str, left: tuple[int, ...], right: tuple[int, ...] | None = None
    ):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right) if right is not None else None
        if self.right is None:
            message = f"{op}: unsupported shape {self.left}"
        else:
            message = f"{op}: incompatible shapes {self.left} and {self.right}"
        super().__init__(message)


class ContractError(OperaError):
    """Raised when a caller breaks an operation's contract."""

    def __init__(self, op: str, reason: str):
        self.op = op
        self.reason = reason
        super().__init__(f"{op}: {reason}")


class TargetIndexError(ContractError, IndexError):
    """Raised when a class index falls outside ``[0, K)``."""

    def __init__(self, index: int, n_classes: int):
        self.index = index
        self.n_classes = n_classes
        super().__init__(
            "cross_entropy", f"target {index} out of range for {n_classes} classes"
        )


class LengthError(OperaError):
    """Raised when an input is too short for the encoder."""

    def __init__(self, n_frames: int, minimum: int, clip_id: str | None = None):
        self.n_frames = n_frames
        self.minimum = minimum
        self.clip_id = clip_id
        where = f" (clip '{clip_id}')" if clip_id else ""
        super().__init__(
            f"Input of {n_frames} frames is below the encoder minimum "
            f"of {minimum}{where}"
        )


class TrainingError(OperaError):
    """Raised when optimization diverges."""

    def __init__(
        self,
        reason: str,
        parameter: str | None = None,
        epoch: int | None = None,
        batch: int | None = None,
    ):
        self.reason = reason
        self.parameter = parameter
        self.epoch = epoch
        self.batch = batch
        context = []
        if parameter is not None:
            context.append(f"parameter={parameter}")
        if epoch is not None:
            context.append(f"epoch={epoch}")
        if batch is not None:
            context.append(f"batch={batch}")
        suffix = f" ({', '.join(context)})" if context else ""
        super().__init__(f"Training failed: {reason}{suffix}")


class ManifestError(OperaError):
    """Base class for manifest errors; always carries the line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"Manifest line {line}: {reason}")


class DuplicateIdError(ManifestError):
    def __init__(self, clip_id: str, line: int, first_line: int):
        self.clip_id = clip_id
        self.first_line = first_line
        super().__init__(
            line, f"duplicate id '{clip_id}' (first seen on line {first_line})"
        )


class MissingAudioError(ManifestError):
    def __init__(self, path: Path, line: int):
        self.path = path
        super().__init__(line, f"audio file not found: {path}")


class MalformedRecordError(ManifestError):
    pass


class CompletenessError(OperaError):
    """Raised when a result table lacks a (task, method) cell."""

    def __init__(self, task_id: str, method: str):
        self.task_id = task_id
        self.method = method
        super().__init__(f"Missing value for task '{task_id}', method '{method}'")


class SplitError(OperaError):
    """Raised when a split cannot be formed or leaks subjects."""

    def __init__(self, strategy: str, reason: str):
        self.strategy = strategy
        self.reason = reason
        super().__init__(f"Cannot build {strategy} split: {reason}")


class ArchiveError(OperaError):
    """Raised when a binary archive has bad magic, version or is truncated."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"Bad archive '{path}': {reason}")


class DataIOError(OperaError):
    """Raised when reading or writing a data file fails."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"I/O failure on '{path}': {reason}")


class TemplateRenderError(OperaError):
    """Raised when a report template fails to render."""

    def __init__(self, template_name: str, reason: str):
        self.template_name = template_name
        self.reason = reason
        super().__init__(f"Template rendering failed ('{template_name}'): {reason}")
