"""Per-epoch pretraining records."""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from opera_forge.core.exceptions import DataIOError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    top1: float | None = None
    val_baseline: float | None = None


@dataclass
class TrainHistory:
    """Epoch records plus the number of optimizer updates applied."""

    records: list[EpochRecord] = field(default_factory=list)
    updates: int = 0

    @property
    def best_epoch(self) -> int:
        """Epoch with the lowest validation loss (the earliest on ties)."""
        if not self.records:
            return -1
        return min(self.records, key=lambda r: (r.val_loss, r.epoch)).epoch

    @property
    def best(self) -> EpochRecord:
        return next(r for r in self.records if r.epoch == self.best_epoch)

    def to_jsonl(self) -> str:
        lines = (json.dumps(asdict(r), sort_keys=True) for r in self.records)
        return "".join(f"{line}\n" for line in lines)

    def write(self, path: Path) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_jsonl(), encoding="utf-8")
        except OSError as e:
            raise DataIOError(str(path), str(e)) from e
        logger.info("Wrote training history to %s", path)

    @classmethod
    def read(cls, path: Path) -> "TrainHistory":
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise DataIOError(str(path), str(e)) from e
        records = [EpochRecord(**json.loads(line)) for line in lines if line.strip()]
        return cls(records=records)
