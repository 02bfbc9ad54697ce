"""CLI entry point for knockoff-lab."""

import json
from pathlib import Path
from typing import Annotated

import typer
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from core.config import ConfigError, ConfigSettings, load_config
from core.errors import KnockoffLabError
from core.models import (
    MIXTURE_WEIGHT_PRESETS,
    NET_PRESETS,
    ExperimentReport,
    ExperimentSpec,
)

app = typer.Typer(
    name="knockoff-lab",
    help="Train deep knockoff generators and run knockoff-filter experiments",
)
console = Console()

ConfigOption = Annotated[
    Path | None, typer.Option("--config", "-c", help="Path to YAML configuration file")
]
SetOption = Annotated[
    list[str] | None,
    typer.Option("--set", help="Override a configuration key (section.key=value), repeatable"),
]
SeedOption = Annotated[int | None, typer.Option(help="Base seed (overrides experiment.base_seed)")]
RepeatsOption = Annotated[int | None, typer.Option(help="Number of repeats")]
WorkersOption = Annotated[int | None, typer.Option(help="Concurrent trials")]
OutputOption = Annotated[Path | None, typer.Option("--output-dir", "-o", help="Output directory")]
PresetOption = Annotated[str | None, typer.Option(help="Net preset: full, desk or tiny")]


# =============================================================================
# Helpers
# =============================================================================


def _print_error(error: KnockoffLabError) -> None:
    console.print(f"[red]{error.message}[/red]")
    for detail in error.details:
        console.print(f"  [dim]• {detail}[/dim]")


def _load(
    config: Path | None,
    overrides: list[str] | None,
    seed: int | None = None,
    repeats: int | None = None,
    workers: int | None = None,
    output_dir: Path | None = None,
    preset: str | None = None,
) -> tuple[ExperimentSpec, ConfigSettings]:
    """Load the config file plus flag overrides; exits with code 1 on error."""
    items = list(overrides or [])
    if seed is not None:
        items.append(f"experiment.base_seed={seed}")
    if repeats is not None:
        items.append(f"experiment.num_repeats={repeats}")
    if workers is not None:
        items.append(f"settings.workers={workers}")
    if output_dir is not None:
        items.append(f"settings.output_dir={output_dir}")
    if preset is not None:
        items.append(f"experiment.net_preset={preset}")
    try:
        loaded = load_config(config, items)
    except ConfigError as e:
        _print_error(e)
        raise typer.Exit(1)
    return loaded.spec, loaded.settings


def _require_dataset(directory: Path):
    from core.datagen import load_dataset

    dataset = load_dataset(directory)
    if dataset is None:
        console.print(f"[red]No dataset found in {directory}[/red]")
        raise typer.Exit(1)
    return dataset


def _selection_table(report: ExperimentReport, title: str) -> Table:
    table = Table(title=title)
    table.add_column("Statistic", style="cyan")
    for column in ("Mean", "Std", "Median", "5%", "95%"):
        table.add_column(column, justify="right")
    for name in ("fdp", "power", "tau", "num_selected", "train_seconds"):
        stats = report.aggregates.get(name)
        if stats is None:
            continue
        table.add_row(
            name,
            *(f"{v:.3f}" for v in (stats.mean, stats.std, stats.median, stats.q05, stats.q95)),
        )
    return table


def _display_report(report: ExperimentReport) -> None:
    """Display an experiment report in a panel and table."""
    console.print()
    console.print(
        Panel(
            f"[bold]Dataset:[/bold] {report.spec.dataset.tag} "
            f"(n={report.spec.n}, p={report.spec.p})\n"
            f"[bold]Repeats:[/bold] {len(report.successful)}/{len(report.trials)} successful\n"
            f"[bold]Digest:[/bold] {report.digest}\n"
            f"[bold]Total Duration:[/bold] {report.total_seconds:.1f}s",
            title=f"Experiment {report.spec.tag}",
            border_style="green",
        )
    )
    console.print(_selection_table(report, "Selection"))
    if report.single_repeat:
        console.print("[dim]Single repeat: std reported as 0[/dim]")

    if report.failures:
        console.print()
        console.print("[red]Failures:[/red]")
        for failure in report.failures:
            console.print(
                f"  • repeat [cyan]{failure['repeat_index']}[/cyan] "
                f"({failure['stage']}): {failure['error']}"
            )


def _display_variants(reports: dict[str, ExperimentReport], title: str) -> None:
    table = Table(title=title)
    table.add_column("Variant", style="cyan")
    table.add_column("FDR", justify="right")
    table.add_column("Power", justify="right")
    table.add_column("Failed", justify="right")
    for name, report in reports.items():
        fdp = report.aggregates.get("fdp")
        power = report.aggregates.get("power")
        table.add_row(
            name,
            f"{fdp.mean:.3f} ± {fdp.std:.3f}" if fdp else "-",
            f"{power.mean:.3f} ± {power.std:.3f}" if power else "-",
            str(len(report.failures)),
        )
    console.print(table)


def _run_with_progress(description: str, fn, *args, **kwargs):
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        TimeElapsedColumn(),
        console=console,
    ) as progress:
        task = progress.add_task(description, total=None)
        try:
            result = fn(*args, **kwargs)
            progress.update(task, description=f"[green]{description} done[/green]")
        except Exception:
            progress.update(task, description=f"[red]{description} failed[/red]")
            raise
    return result


# =============================================================================
# Pipeline Stages
# =============================================================================


@app.command(name="generate-data")
def generate_data(
    out: Annotated[Path, typer.Option(help="Directory for X.csv, Y.csv and metadata.json")],
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
):
    """Draw a synthetic dataset and write it to disk."""
    from core.datagen import generate_dataset, save_dataset

    spec, _ = _load(config, overrides, seed=seed)
    try:
        dataset = generate_dataset(
            spec.dataset, spec.n, spec.p, spec.coefficients, spec.response, spec.base_seed
        )
        paths = save_dataset(dataset, out)
    except KnockoffLabError as e:
        _print_error(e)
        raise typer.Exit(1)

    console.print(
        f"[green]✓[/green] {dataset.tag} dataset n={dataset.n}, p={dataset.p}, "
        f"{int(dataset.nonnull_mask.sum())} nonnulls"
    )
    for name, path in paths.items():
        console.print(f"  {name}: [cyan]{path}[/cyan]")


@app.command()
def train(
    data: Annotated[Path, typer.Option(help="Dataset directory from generate-data")],
    out: Annotated[Path, typer.Option(help="Generator checkpoint file")],
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
    preset: PresetOption = None,
):
    """Train a knockoff generator on a dataset."""
    from core.checkpoint import save_generator, save_model
    from core.report import plot_loss_competition
    from core.trainer import train as train_generator

    spec, _ = _load(config, overrides, seed=seed, preset=preset)
    dataset = _require_dataset(data)
    cfg = spec.effective_train_config().model_copy(update={"seed": spec.base_seed})

    try:
        result = _run_with_progress(
            "Training generator", train_generator, dataset.X, cfg, spec.net_config()
        )
        save_generator(result.net, out, result.swappers, cfg)
        log_path = out.with_suffix(".log.json")
        save_model(result.log, log_path)
        figure = plot_loss_competition(result.log, out.with_suffix(".loss.png"))
    except KnockoffLabError as e:
        _print_error(e)
        raise typer.Exit(1)

    log = result.log
    console.print(
        f"[green]✓[/green] Best epoch {log.best_epoch} of {log.stopping_epoch} "
        f"({log.total_seconds:.1f}s, {log.swapper_updates} swapper updates)"
    )
    console.print(f"  checkpoint: [cyan]{out}[/cyan]")
    console.print(f"  log: [cyan]{log_path}[/cyan]")
    console.print(f"  loss figure: [cyan]{figure}[/cyan]")


@app.command()
def knockoff(
    checkpoint: Annotated[Path, typer.Option(help="Generator checkpoint from train")],
    data: Annotated[Path, typer.Option(help="Dataset directory")],
    out: Annotated[Path, typer.Option(help="Output CSV for the knockoff matrix")],
    seed: Annotated[int, typer.Option(help="Seed of the noise Z")] = 0,
):
    """Generate a knockoff matrix from a trained generator."""
    from core.checkpoint import load_generator
    from core.datagen import save_matrix
    from core.knockoff_model import generate_knockoff

    loaded = load_generator(checkpoint)
    if loaded is None:
        console.print(f"[red]Checkpoint not found: {checkpoint}[/red]")
        raise typer.Exit(1)
    net, _, _ = loaded
    dataset = _require_dataset(data)
    try:
        X_tilde = generate_knockoff(net, dataset.X, seed)
        save_matrix(X_tilde, out, prefix="xk")
    except KnockoffLabError as e:
        _print_error(e)
        raise typer.Exit(1)
    console.print(f"[green]✓[/green] Knockoff {X_tilde.shape} written to [cyan]{out}[/cyan]")


@app.command()
def select(
    data: Annotated[Path, typer.Option(help="Dataset directory")],
    knockoffs: Annotated[Path, typer.Option("--knockoff", help="Knockoff matrix CSV")],
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
    drp: Annotated[bool, typer.Option("--drp/--no-drp", help="Apply DRP first")] = True,
    out: Annotated[Path | None, typer.Option(help="Write the SelectionResult JSON")] = None,
):
    """Run the knockoff filter on a dataset and a knockoff matrix."""
    from core.checkpoint import save_model
    from core.datagen import load_matrix
    from core.drp import apply_drp
    from core.filter import run_filter
    from core.seeding import content_digest

    spec, _ = _load(config, overrides, seed=seed)
    dataset = _require_dataset(data)
    if dataset.Y is None:
        console.print("[red]Dataset has no response Y[/red]")
        raise typer.Exit(1)

    try:
        X_tilde = load_matrix(knockoffs)
        metadata = {}
        if drp:
            outcome = apply_drp(X_tilde, dataset.X, spec.drp, seed=spec.base_seed)
            X_tilde = outcome.knockoff
            metadata = outcome.metadata()
        result = run_filter(
            dataset.X, X_tilde, dataset.Y, dataset.truth_mask, spec.selection, spec.base_seed,
            metadata, content_digest(spec.model_dump()),
        )
    except KnockoffLabError as e:
        _print_error(e)
        raise typer.Exit(1)

    console.print(
        Panel(
            f"[bold]Selected:[/bold] {result.selected}\n"
            f"[bold]tau:[/bold] {result.tau:.4g}  [bold]q:[/bold] {result.q}\n"
            f"[bold]Scores:[/bold] {result.score_text()}\n"
            f"[bold]Config digest:[/bold] {result.config_digest}",
            title="Knockoff Selection",
            border_style="green",
        )
    )
    if out is not None:
        save_model(result, out)
        console.print(f"[green]✓[/green] Selection saved to: [cyan]{out}[/cyan]")


@app.command()
def diagnose(
    data: Annotated[Path, typer.Option(help="Dataset directory")],
    knockoffs: Annotated[Path, typer.Option("--knockoff", help="Knockoff matrix CSV")],
    seed: Annotated[int, typer.Option(help="Seed of swap sets and projections")] = 0,
    out: Annotated[Path | None, typer.Option(help="Write long-format metric rows (CSV)")] = None,
    model_tag: Annotated[str, typer.Option(help="Model label for the rows")] = "generator",
):
    """Measure the swap property of a knockoff matrix."""
    from core.datagen import load_matrix
    from core.diagnostics import swap_metric_rows, swap_property_suite

    dataset = _require_dataset(data)
    try:
        report = swap_property_suite(dataset.X, load_matrix(knockoffs), seed)
    except KnockoffLabError as e:
        _print_error(e)
        raise typer.Exit(1)

    table = Table(title="Swap Property")
    table.add_column("Metric", style="cyan")
    for ratio in report.ratios:
        table.add_column(f"r={ratio:g}", justify="right")
    table.add_column("Average", justify="right", style="bold")
    for metric, values in report.per_ratio.items():
        table.add_row(metric, *(f"{v:.4f}" for v in values), f"{report.averages[metric]:.4f}")
    console.print(table)
    console.print(f"[dim]Mean |corr(X_j, X~_j)|: {report.mean_abs_correlation:.3f}[/dim]")

    if out is not None:
        swap_metric_rows(report, model_tag, dataset.tag).to_csv(out, index=False)
        console.print(f"[green]✓[/green] Metrics saved to: [cyan]{out}[/cyan]")


# =============================================================================
# Experiments
# =============================================================================


@app.command()
def experiment(
    seed: Annotated[int, typer.Option(help="Base seed of the repeat ladder (required)")],
    config: ConfigOption = None,
    overrides: SetOption = None,
    repeats: RepeatsOption = None,
    workers: WorkersOption = None,
    output_dir: OutputOption = None,
    preset: PresetOption = None,
):
    """Run repeated seeded trials and report FDR and power."""
    from orchestrators.prefect.client import generate_flow_run_id, run_experiment

    spec, settings = _load(config, overrides, seed, repeats, workers, output_dir, preset)
    run_id = generate_flow_run_id(spec.tag)
    target = Path(settings.output_dir) / run_id if settings.save_results else None

    console.print(f"[green]✓[/green] Flow started: [cyan]{run_id}[/cyan]")
    console.print("[dim]Running in ephemeral mode (no Prefect server required)[/dim]")
    try:
        report = _run_with_progress(
            f"Running {spec.num_repeats} trials",
            run_experiment,
            spec,
            settings.workers,
            target,
            settings.formats,
        )
    except KnockoffLabError as e:
        _print_error(e)
        raise typer.Exit(1)

    _display_report(report)
    if target is not None:
        console.print(f"[green]✓[/green] Results saved to: [cyan]{target}[/cyan]")


def _sweep(kind: str, title: str, config, overrides, seed, repeats, workers, output_dir, preset):
    from orchestrators.prefect.client import generate_flow_run_id, run_sweep

    spec, settings = _load(config, overrides, seed, repeats, workers, output_dir, preset)
    run_id = generate_flow_run_id(f"{spec.tag}-{kind}")
    target = Path(settings.output_dir) / run_id if settings.save_results else None
    console.print(f"[green]✓[/green] Flow started: [cyan]{run_id}[/cyan]")
    try:
        reports = _run_with_progress(
            title, run_sweep, kind, spec, settings.workers, target, settings.formats
        )
    except KnockoffLabError as e:
        _print_error(e)
        raise typer.Exit(1)

    _display_variants(reports, title)
    if target is not None:
        console.print(f"[green]✓[/green] Results saved to: [cyan]{target}[/cyan]")
    return reports


@app.command()
def ablation(
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
    repeats: RepeatsOption = None,
    workers: WorkersOption = None,
    output_dir: OutputOption = None,
    preset: PresetOption = None,
):
    """Compare full training with REx, K, swapper-decorrelation and DRP ablations."""
    reports = _sweep(
        "ablation", "Ablation", config, overrides, seed, repeats, workers, output_dir, preset
    )
    full, single = reports["full"].aggregates.get("fdp"), reports["K=1"].aggregates.get("fdp")
    if full and single:
        console.print(
            f"[dim]Mean FDR with K=1: {single.mean:.3f} vs full: {full.mean:.3f}[/dim]"
        )


@app.command(name="sweep-alpha")
def sweep_alpha(
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
    repeats: RepeatsOption = None,
    workers: WorkersOption = None,
    output_dir: OutputOption = None,
    preset: PresetOption = None,
):
    """FDR and power for DRP weights 0, 0.1, ..., 1."""
    _sweep("alpha", "DRP weight sweep", config, overrides, seed, repeats, workers, output_dir,
           preset)


@app.command(name="sweep-beta-scale")
def sweep_beta_scale(
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
    repeats: RepeatsOption = None,
    workers: WorkersOption = None,
    output_dir: OutputOption = None,
    preset: PresetOption = None,
):
    """FDR and power for coefficient divisors c in {5, 10, 15, 20}."""
    _sweep("beta-scale", "Coefficient scale sweep", config, overrides, seed, repeats, workers,
           output_dir, preset)


@app.command(name="sweep-rho")
def sweep_rho(
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
    repeats: RepeatsOption = None,
    workers: WorkersOption = None,
    output_dir: OutputOption = None,
    preset: PresetOption = None,
):
    """FDR and power for mixture correlation bases 0.6, 0.7, 0.8."""
    _sweep("rho", "Correlation base sweep", config, overrides, seed, repeats, workers,
           output_dir, preset)


@app.command(name="sweep-pi")
def sweep_pi(
    config: ConfigOption = None,
    overrides: SetOption = None,
    seed: SeedOption = None,
    repeats: RepeatsOption = None,
    workers: WorkersOption = None,
    output_dir: OutputOption = None,
    preset: PresetOption = None,
):
    """FDR and power across the ten mixture-weight presets."""
    _sweep("pi", "Mixture weight sweep", config, overrides, seed, repeats, workers,
           output_dir, preset)


# =============================================================================
# Reference
# =============================================================================


@app.command()
def presets():
    """List net presets and mixture-weight presets."""
    nets = Table(title="Net Presets")
    nets.add_column("Name", style="cyan")
    nets.add_column("Heads", justify="right")
    nets.add_column("Layers", justify="right")
    nets.add_column("Hidden", justify="right")
    nets.add_column("Dropout", justify="right")
    for name, cfg in NET_PRESETS.items():
        nets.add_row(
            name, str(cfg.num_heads), str(cfg.num_layers), str(cfg.hidden_dim), f"{cfg.dropout:g}"
        )
    console.print(nets)

    weights = Table(title="Mixture Weight Presets")
    weights.add_column("Name", style="cyan")
    weights.add_column("Weights")
    for name, values in MIXTURE_WEIGHT_PRESETS.items():
        weights.add_row(name, ", ".join(f"{v:g}" for v in values))
    console.print(weights)


@app.command(name="show-config")
def show_config(
    config: ConfigOption = None,
    overrides: SetOption = None,
):
    """Print the fully resolved configuration as JSON."""
    spec, settings = _load(config, overrides)
    payload = {"spec": spec.model_dump(), "settings": settings.model_dump()}
    console.print_json(json.dumps(payload, default=str))


if __name__ == "__main__":
    app()
