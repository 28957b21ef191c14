"""CLI entry point for opera-forge."""

import logging
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Protocol, cast

import numpy as np
import typer
from opera_forge_settings import SettingsError, configure, get_config
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from rich.console import Console
from rich.table import Table

from opera_forge.bench.features import extract_features, read_features, write_features
from opera_forge.bench.finetune import FinetuneConfig
from opera_forge.bench.ranking import DEFAULT_TOLERANCE, reproduce_mrr_fixture
from opera_forge.bench.runner import (
    ResultRecord,
    finetune_records,
    load_plan,
    prepare_task,
    probe_records,
    run_benchmark,
    write_results_csv,
)
from opera_forge.bench.tasks import get_task
from opera_forge.config.config import AppConfig
from opera_forge.core.exceptions import ConfigError, OperaError
from opera_forge.core.logging import setup_logging
from opera_forge.core.types import EncoderKind, PadPolicy, PretrainMethod
from opera_forge.data.batching import build_pretrain_batches
from opera_forge.data.curation import (
    clip_spectrogram,
    preprocess_manifest,
    spectrogram_loader,
)
from opera_forge.data.manifest import load_manifest
from opera_forge.data.synth import synth_corpus
from opera_forge.dsp.cache import write_spectrogram
from opera_forge.dsp.framing import pad
from opera_forge.models.checkpoint import EncoderCheckpoint
from opera_forge.models.saliency import embedding_energy, saliency, write_saliency_png
from opera_forge.ssl.trainer import pretrain as run_pretraining


class CoreOnlyConfig(BaseModel):
    """Unified configuration holding the single ``core`` namespace."""

    model_config = ConfigDict(frozen=True)
    core: AppConfig = Field(default_factory=AppConfig)


class HasCoreConfig(Protocol):
    """Protocol for configs that have a .core attribute."""

    core: AppConfig


# Bootstrap settings; the root callback re-configures with --config
configure(CoreOnlyConfig)

app = typer.Typer(
    name="opera-forge",
    help="Respiratory-audio pretraining and benchmarking",
    add_completion=False,
    no_args_is_help=True,
)

console = Console()
logger = logging.getLogger(__name__)

# Global flags, applied as dotted overrides on top of every settings layer
_global_overrides: dict[str, Any] = {}


@app.callback()
def root(
    config: Path | None = typer.Option(
        None, "--config", "-c", help="Settings file layered over the defaults"
    ),
    seed: int | None = typer.Option(None, "--seed", min=0, help="Global seed"),
    threads: int | None = typer.Option(
        None, "--threads", min=1, help="Worker cap (1 gives byte-identical output)"
    ),
    out: Path | None = typer.Option(
        None, "--out", help="Artifact root (default: OPERA_FORGE_OUT or settings)"
    ),
) -> None:
    """Respiratory-audio pretraining and benchmarking."""
    configure(CoreOnlyConfig, project_root=Path.cwd(), config_file=config)
    _global_overrides.clear()
    _global_overrides.update(
        {
            "core.runtime.seed": seed,
            "core.runtime.threads": threads,
            "core.output.directory": out,
        }
    )


def _load(overrides: dict[str, Any] | None = None) -> AppConfig:
    """Resolve settings (flags > env > --config > project > defaults).

    Exits with status 2 when a layer or flag is invalid.
    """
    try:
        config = cast(
            HasCoreConfig, get_config({**_global_overrides, **(overrides or {})})
        )
    except (SettingsError, ValidationError) as e:
        console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(2) from None
    setup_logging(config.core.logging)
    return config.core


@contextmanager
def _errors(command: str) -> Iterator[None]:
    """Map library exceptions to exit codes: 2 for configuration, 1 otherwise."""
    try:
        yield
    except typer.Exit:
        raise
    except (ConfigError, SettingsError) as e:
        console.print(f"[red]Error:[/red] {e}")
        logger.error("%s: configuration error: %s", command, e)
        raise typer.Exit(2) from None
    except OperaError as e:
        console.print(f"[red]Error:[/red] {e}")
        logger.error("%s failed: %s", command, e)
        raise typer.Exit(1) from None
    except Exception as e:
        console.print(f"[red]Unexpected error:[/red] {e}")
        logger.exception("Unexpected error in %s", command)
        raise typer.Exit(1) from None


def _records_table(title: str, records: Sequence[ResultRecord]) -> Table:
    table = Table(title=title)
    table.add_column("Task", style="cyan")
    table.add_column("Method")
    table.add_column("Metric")
    table.add_column("Mean", justify="right", style="green")
    table.add_column("Std", justify="right")
    table.add_column("Units", justify="right")
    for r in records:
        table.add_row(
            r.task_id,
            r.method,
            str(r.metric),
            f"{r.mean:.4f}",
            f"{r.std:.4f}",
            str(r.n_units),
        )
    return table


@app.command()
def version() -> None:
    """Show version information."""
    from opera_forge import __version__

    typer.echo(f"opera-forge version {__version__}")


@app.command()
def synth(
    dest: Path | None = typer.Option(
        None, "--dest", help="Corpus directory (default: <out>/corpus)"
    ),
    subjects: int | None = typer.Option(None, "--subjects", min=1),
    clips: int | None = typer.Option(None, "--clips-per-subject", min=1),
    duration: float | None = typer.Option(None, "--duration", help="Seconds"),
) -> None:
    """Write a synthetic breathing corpus and its manifest.

    Example usage:

        opera-forge --seed 7 synth --subjects 20 --clips-per-subject 10
    """
    cfg = _load(
        {
            "core.synth.n_subjects": subjects,
            "core.synth.clips_per_subject": clips,
            "core.synth.duration_s": duration,
        }
    )
    with _errors("synth"):
        synth_cfg = cfg.synth.model_copy(update={"seed": cfg.runtime.seed})
        out = dest or cfg.output.directory / "corpus"
        manifest = synth_corpus(synth_cfg, out, cfg.runtime.threads)
        console.print(f"[green]Wrote {len(manifest)} clips to[/green] {out}")


@app.command()
def preprocess(
    manifest: Path = typer.Argument(..., help="Audio manifest (JSON lines)"),
    dest: Path | None = typer.Option(
        None, "--dest", help="Cache directory (default: <out>/cache)"
    ),
) -> None:
    """Curate clips into normalized log-mel spectrograms."""
    cfg = _load()
    with _errors("preprocess"):
        out = dest or cfg.output.directory / "cache"
        cache = preprocess_manifest(
            load_manifest(manifest), cfg.dsp, out, cfg.runtime.threads
        )
        console.print(
            f"[green]Cached {len(cache)} spectrograms to[/green] {out} "
            f"(mean {cache.norm_mean:.4f}, std {cache.norm_std:.4f})"
        )


@app.command()
def pretrain(
    manifest: Path = typer.Argument(..., help="Cache manifest from preprocess"),
    method: PretrainMethod | None = typer.Option(None, "--method", "-m"),
    epochs: int | None = typer.Option(None, "--epochs", min=1),
    batch_size: int | None = typer.Option(None, "--batch-size", min=1),
    encoder: EncoderKind | None = typer.Option(None, "--encoder"),
    dest: Path | None = typer.Option(
        None, "--dest", help="Run directory (default: <out>/pretrain/<method>)"
    ),
) -> None:
    """Pretrain an encoder; writes checkpoint.opck and history.jsonl."""
    cfg = _load(
        {
            "core.pretrain.method": method,
            "core.pretrain.epochs": epochs,
            "core.pretrain.batch_size": batch_size,
            "core.encoder.kind": encoder,
        }
    )
    with _errors("pretrain"):
        pre = cfg.pretrain.model_copy(update={"seed": cfg.runtime.seed})
        cache = load_manifest(manifest)
        batches = build_pretrain_batches(
            cache,
            pre.batch_size,
            pre.crop_frames,
            spectrogram_loader(cache, cfg.dsp),
            seed=pre.seed,
        )
        checkpoint, history = run_pretraining(batches, pre, cfg.encoder)
        out = dest or cfg.output.directory / "pretrain" / str(pre.method)
        checkpoint.save(out / "checkpoint.opck")
        history.write(out / "history.jsonl")

        best = history.best
        console.print(
            f"[green]Pretrained {pre.method}[/green] for {pre.epochs} epochs; "
            f"best epoch {best.epoch} (val loss {best.val_loss:.4f})"
        )
        console.print(f"[cyan]Checkpoint:[/cyan] {out / 'checkpoint.opck'}")


@app.command()
def extract(
    checkpoint: Path = typer.Argument(..., help="Encoder checkpoint"),
    manifest: Path = typer.Argument(..., help="Cache manifest"),
    task: str = typer.Option(..., "--task", "-t", help="Task id, e.g. synth-rate"),
    dest: Path | None = typer.Option(
        None, "--dest", help="Feature file (default: <out>/features/<task>.opfe)"
    ),
) -> None:
    """Embed a task's clips with a frozen encoder."""
    cfg = _load()
    with _errors("extract"):
        spec = get_task(task)
        encoder = EncoderCheckpoint.load(checkpoint).build_encoder(cfg.runtime.seed)
        data = prepare_task(spec, load_manifest(manifest))
        features = extract_features(
            encoder, data.clips(cfg.dsp), spec, cfg.runtime.threads
        )
        out = dest or cfg.output.directory / "features" / f"{task}.opfe"
        write_features(out, features)
        console.print(
            f"[green]Wrote {len(features.ids)} x {features.dim} features to[/green] "
            f"{out}"
        )


@app.command()
def probe(
    features: Path = typer.Argument(..., help="Feature file from extract"),
    manifest: Path = typer.Argument(..., help="Cache manifest"),
    task: str = typer.Option(..., "--task", "-t"),
    method: str | None = typer.Option(
        None, "--method", help="Name in the results (default: feature file stem)"
    ),
) -> None:
    """Train linear probes on extracted features and report the metric."""
    cfg = _load()
    with _errors("probe"):
        spec = get_task(task)
        data = prepare_task(spec, load_manifest(manifest))
        records = probe_records(
            data, read_features(features), method or features.stem, cfg.probe
        )
        out = cfg.output.directory / "probe" / f"{task}.csv"
        write_results_csv(records, out)
        console.print(_records_table(f"Linear probe: {task}", records))


@app.command(name="finetune")
def finetune_command(
    checkpoint: Path = typer.Argument(..., help="Encoder checkpoint"),
    manifest: Path = typer.Argument(..., help="Cache manifest"),
    task: str = typer.Option(..., "--task", "-t"),
    epochs: int = typer.Option(10, "--epochs", min=1),
    lr: float = typer.Option(1e-4, "--lr", min=0.0),
    batch_size: int = typer.Option(16, "--batch-size", min=1),
    freeze: list[str] = typer.Option(
        [], "--freeze", help="Parameter prefix to keep fixed (repeatable)"
    ),
) -> None:
    """Fine-tune encoder and a linear head on each training split.

    Fixed-split tasks repeat the run with seeds ``0..n_runs-1``.
    """
    cfg = _load()
    with _errors("finetune"):
        spec = get_task(task)
        ft_cfg = FinetuneConfig(
            lr=lr,
            epochs=epochs,
            batch_size=batch_size,
            frozen=tuple(freeze),
            seed=cfg.runtime.seed,
        )
        encoder = EncoderCheckpoint.load(checkpoint).build_encoder(cfg.runtime.seed)
        data = prepare_task(spec, load_manifest(manifest))
        record = finetune_records(data, data.clips(cfg.dsp), encoder, ft_cfg)
        write_results_csv([record], cfg.output.directory / "finetune" / f"{task}.csv")
        console.print(_records_table(f"Fine-tuning: {task}", [record]))


@app.command()
def benchmark(
    plan: Path = typer.Argument(..., help="Benchmark plan (TOML)"),
    dest: Path | None = typer.Option(
        None, "--dest", help="Report directory (default: <out>/benchmark)"
    ),
) -> None:
    """Run a benchmark plan; writes results.csv and report.md.

    Exits with status 1 when any task or method failed.
    """
    cfg = _load()
    with _errors("benchmark"):
        out = dest or cfg.output.directory / "benchmark"
        result = run_benchmark(
            load_plan(plan),
            out,
            cfg.dsp,
            cfg.runtime.threads,
            probe_cfg=cfg.probe,
            encoder_cfg=cfg.encoder,
        )
        console.print(_records_table("Benchmark", result.records))
        console.print(f"[cyan]Report:[/cyan] {out}")
    if not result.ok:
        for failure in result.failures:
            console.print(
                f"[red]Failed:[/red] {failure.task_id} / {failure.method}: "
                f"{failure.reason}"
            )
        raise typer.Exit(1)


@app.command(name="mrr-fixture")
def mrr_fixture(
    fixture: Path | None = typer.Option(None, "--fixture", help="Method table CSV"),
    expected: Path | None = typer.Option(None, "--expected", help="Expected MRR CSV"),
    tolerance: float = typer.Option(DEFAULT_TOLERANCE, "--tolerance", min=0.0),
) -> None:
    """Recompute mean reciprocal ranks from the shipped result tables.

    Exits with status 1 when a value differs from the expectation.
    """
    _load()
    with _errors("mrr-fixture"):
        report = reproduce_mrr_fixture(fixture, expected, tolerance)
        table = Table(title="Mean reciprocal rank")
        table.add_column("Method", style="cyan")
        for group in report.groups:
            table.add_column(group, justify="right")
        for method, scores in report.scores.items():
            table.add_row(method, *(f"{scores[g]:.4f}" for g in report.groups))
        console.print(table)
    if not report.ok:
        for check in report.failures:
            console.print(
                f"[red]Mismatch:[/red] {check.method}/{check.group} expected "
                f"{check.expected:.4f}, got {check.actual:.4f}"
            )
        raise typer.Exit(1)
    console.print(f"[green]All {len(report.checks)} values match[/green]")


@app.command(name="saliency")
def saliency_command(
    checkpoint: Path = typer.Argument(..., help="Encoder checkpoint"),
    clip: Path = typer.Argument(..., help="WAV file or cached .opsg spectrogram"),
    manifest: Path | None = typer.Option(
        None, "--manifest", help="Cache manifest whose normalization the clip uses"
    ),
    dest: Path | None = typer.Option(
        None, "--dest", help="Directory (default: <out>/saliency)"
    ),
) -> None:
    """Write the input-gradient saliency of a clip as .opsg and .png."""
    cfg = _load()
    with _errors("saliency"):
        encoder = EncoderCheckpoint.load(checkpoint).build_encoder(cfg.runtime.seed)
        corpus = load_manifest(manifest, check_audio=False) if manifest else None
        spec = clip_spectrogram(clip, cfg.dsp, corpus)
        cropped = spec.with_values(spec.values[: encoder.cfg.max_input_frames])
        spec = pad(cropped, encoder.cfg.min_frames, PadPolicy.ZERO)
        heat = saliency(embedding_energy(encoder, spec.floor), spec)
        out = dest or cfg.output.directory / "saliency"
        write_spectrogram(out / f"{clip.stem}.opsg", heat.astype(np.float32))
        write_saliency_png(out / f"{clip.stem}.png", heat)
        console.print(f"[green]Wrote saliency map for {clip.stem} to[/green] {out}")


def main() -> None:
    """Entry point for console script."""
    app()


if __name__ == "__main__":
    main()
