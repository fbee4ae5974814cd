#!/usr/bin/env python3

"""Command-line front end of ddip-otfs-lab. This is the `ddip-otfs` executable."""

from __future__ import annotations

import os
from collections.abc import Callable, Iterable, Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import Literal

import numpy as np
import typer
from pydantic import BaseModel
from rich.console import Console
from rich.markup import escape
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from ddipotfs.config import builtin_config_dir
from ddipotfs.exceptions import ConfigError, DdipOtfsError, EmptyResultError
from ddipotfs.sim.complexity import complexity_report
from ddipotfs.sim.config import SimConfig, apply_overrides, default_output_dir, load_config
from ddipotfs.sim.harness import (
    SCALABLE_PARAMS,
    ProgressCallback,
    SerPoint,
    frame_timing,
    iteration_cdf,
    median_iterations,
    run_parameter_sweep,
    run_sweep,
    run_trial,
    snr_at_ser,
)
from ddipotfs.sim.outputs import (
    write_cdf_csv,
    write_complexity_csv,
    write_loss_trace_csv,
    write_scale_csv,
    write_ser_csv,
    write_trial_csv,
)
from ddipotfs.sim.rng import frame_rng
from ddipotfs.utils.log import add_file_handler, logger, remove_handler

DEFAULT_CONFIG_FILE = Path(os.getenv("DDIPOTFS_CONFIG_PATH", builtin_config_dir / "desk_sweep.conf"))

Subcommand = Literal["sweep", "cdf", "trial", "complexity", "scale"]

_HELP_TEXT = """Simulate an OTFS link and compare the [bold]mmse[/bold], [bold]mmse-bpic[/bold] and [bold]ddip-bpic[/bold] detectors.

[not dim]
Every subcommand reads a flat [green]key = value[/green] (or YAML) config and writes CSVs plus [green]run.log[/green] into the output directory.
[/not dim]
"""

TARGET_SER = 1e-2
_PARSE_ONLY = "parse-only"
# typer raises the usage errors of whichever click it ships with (bundled or external)
_USAGE_ERROR: type[Exception] = next(cls for cls in typer.BadParameter.__mro__ if cls.__name__ == "ClickException")

console = Console(highlight=False)
app = typer.Typer(rich_markup_mode="rich", no_args_is_help=True, help=_HELP_TEXT)


class Invocation(BaseModel):
    subcommand: Subcommand
    config_path: Path
    out_dir: Path
    sim: SimConfig
    """Loaded config with the command-line overrides applied."""
    seed: int | None = None
    detectors: list[str] | None = None
    scale_param: str | None = None
    scale_values: list[int] = []
    scale_snr_db: float | None = None
    iterations: float | None = None
    """Mean D-DIP iteration count for `complexity`; measured from a sweep when unset."""


def _split_csv(value: str | None) -> list[str] | None:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def _check_out_dir(out_dir: Path) -> None:
    if out_dir.exists():
        if not out_dir.is_dir():
            raise ConfigError(f"output path is not a directory: {out_dir}")
        parent = out_dir
    else:
        parent = out_dir.absolute().parent
        while not parent.exists():
            parent = parent.parent
        if not parent.is_dir():
            raise ConfigError(f"cannot create output directory {out_dir}: {parent} is not a directory")
    if not os.access(parent, os.W_OK | os.X_OK):
        raise ConfigError(f"cannot create output directory {out_dir}: {parent} is not writable")


def build_invocation(
    subcommand: Subcommand,
    *,
    config: Path,
    out: Path | None = None,
    seed: int | None = None,
    detectors: str | None = None,
    param: str | None = None,
    values: str | None = None,
    snr: float | None = None,
    iterations: float | None = None,
) -> Invocation:
    """Load the config, apply overrides and check everything `dispatch` relies on."""
    detector_list = _split_csv(detectors)
    sim = apply_overrides(load_config(config), seed=seed, detectors=detector_list)
    out_dir = Path(out) if out is not None else default_output_dir()
    _check_out_dir(out_dir)
    if subcommand == "cdf" and "ddip-bpic" not in sim.detectors:
        raise ConfigError("cdf needs ddip-bpic among the detectors", key="detectors")
    if iterations is not None and iterations < 0:
        raise ConfigError(f"--iterations must be >= 0, got {iterations:g}")
    scale_values: list[int] = []
    if subcommand == "scale":
        if param not in SCALABLE_PARAMS:
            raise ConfigError(f"--param must be one of {', '.join(SCALABLE_PARAMS)}, got {param!r}")
        try:
            scale_values = [int(v) for v in _split_csv(values) or []]
        except ValueError:
            raise ConfigError(f"--values must be comma-separated integers, got {values!r}") from None
        if not scale_values:
            raise ConfigError("--values needs at least one value")
        if snr is None:
            raise ConfigError("--snr is required for scale")
        for value in scale_values:
            apply_overrides(sim, **{param: value, "snr_db_list": [snr]})
    return Invocation(
        subcommand=subcommand,
        config_path=Path(config),
        out_dir=out_dir,
        sim=sim,
        seed=seed,
        detectors=detector_list,
        scale_param=param,
        scale_values=scale_values,
        scale_snr_db=snr,
        iterations=iterations,
    )


def parse_and_validate(argv: Sequence[str]) -> Invocation:
    """Parse command-line arguments into a validated Invocation without running it."""
    command = typer.main.get_command(app)
    try:
        inv = command.main(args=list(argv), prog_name="ddip-otfs", standalone_mode=False, obj=_PARSE_ONLY)
    except _USAGE_ERROR as exc:
        raise ConfigError(exc.format_message()) from None
    if not isinstance(inv, Invocation):
        raise ConfigError("no subcommand given")
    return inv


@contextmanager
def _progress(total: int, description: str) -> Iterator[ProgressCallback]:
    columns = (TextColumn("{task.description}"), BarColumn(), MofNCompleteColumn(), TimeElapsedColumn())
    with Progress(*columns, console=console, transient=True) as progress:
        task = progress.add_task(description, total=total)
        yield lambda n: progress.advance(task, n)


def _output(inv: Invocation, written: list[Path], name: str) -> Path:
    path = inv.out_dir / name
    written.append(path)
    return path


def _print_ser_summary(points: Iterable[SerPoint]) -> None:
    for p in points:
        console.print(
            f"{p.detector:>10}  {p.snr_db:>6g} dB  SER {p.ser:.3e} ± {p.ci_halfwidth:.1e}  "
            f"({p.symbol_errors}/{p.symbols} symbols, {p.frames} frames)"
        )


def _run_sweep(inv: Invocation, written: list[Path]) -> None:
    cfg = inv.sim
    with _progress(cfg.frames * len(cfg.snr_db_list), "sweep") as advance:
        sweep = run_sweep(cfg, advance)
    path = write_ser_csv(_output(inv, written, "ser.csv"), sweep.points)
    logger.info("wrote %s", path)
    if sweep.truncated:
        logger.warning("%d D-DIP runs hit the cap of %d iterations", sweep.truncated, cfg.ddip_cap)
    _print_ser_summary(sweep.points)
    for name in cfg.detectors:
        try:
            console.print(f"{name}: SER {TARGET_SER:g} at {snr_at_ser(sweep, name, TARGET_SER):.2f} dB")
        except EmptyResultError:
            console.print(f"{name}: SER {TARGET_SER:g} not reached")


def _run_cdf(inv: Invocation, written: list[Path]) -> None:
    cfg = apply_overrides(inv.sim, detectors=["ddip-bpic"])
    with _progress(cfg.frames * len(cfg.snr_db_list), "cdf") as advance:
        sweep = run_sweep(cfg, advance)
    path = write_cdf_csv(_output(inv, written, "iteration_cdf.csv"), iteration_cdf(sweep))
    logger.info("wrote %s", path)
    for snr_db in cfg.snr_db_list:
        console.print(f"{snr_db:>6g} dB  median I = {median_iterations(sweep, snr_db):g}")
    console.print(f"all SNRs  median I = {median_iterations(sweep):g}  ({sweep.truncated} runs capped)")


def _run_trial(inv: Invocation, written: list[Path]) -> None:
    cfg = inv.sim
    snr_db = cfg.snr_db_list[0]
    trial = run_trial(cfg, snr_db, frame_rng(cfg.seed, 0), frame=0)
    channel = trial.realization.channel

    timing = frame_timing(cfg)
    console.print(
        f"frame {cfg.M}x{cfg.N}: bandwidth {timing.bandwidth_hz / 1e3:g} kHz, "
        f"duration {timing.duration_s * 1e3:.4g} ms (prefix {timing.cp_samples} samples), "
        f"carrier {cfg.carrier_frequency / 1e9:g} GHz"
    )
    table = Table("path", "|h|", "l", "k", "delay [us]", "Doppler [Hz]")
    for i, path in enumerate(channel.describe(cfg.delta_f)):
        table.add_row(
            str(i),
            f"{path['gain_abs']:.3f}",
            str(path["delay_index"]),
            str(path["doppler_index"]),
            f"{path['delay_us']:.3f}",
            f"{path['doppler_hz']:.1f}",
        )
    console.print(table)

    channel_path = _output(inv, written, "channel.txt")
    channel_path.write_text(channel.to_text(), encoding="utf-8")
    write_trial_csv(_output(inv, written, "trial.csv"), trial)
    for name, outcome in trial.outcomes.items():
        line = f"{name:>10}  {snr_db:>6g} dB  {outcome.symbol_errors}/{trial.symbols} symbol errors  {outcome.seconds:.3f} s"
        if outcome.ddip_iterations is not None:
            line += f"  I = {outcome.ddip_iterations}"
        bpic = outcome.detection.bpic
        if bpic is not None and bpic.symbol_errors:
            line += f"  per-iteration errors {bpic.symbol_errors}"
        console.print(line)
        if cfg.loss_trace and outcome.loss_trace:
            path = write_loss_trace_csv(_output(inv, written, "loss_trace.csv"), outcome.loss_trace)
            logger.info("wrote %s", path)


def _measured_iterations(inv: Invocation) -> float:
    cfg = apply_overrides(inv.sim, detectors=["ddip-bpic"])
    with _progress(cfg.frames * len(cfg.snr_db_list), "measuring I") as advance:
        counts = run_sweep(cfg, advance).iteration_counts()
    return float(np.mean(counts))


def _run_complexity(inv: Invocation, written: list[Path]) -> None:
    cfg = inv.sim
    iterations = inv.iterations if inv.iterations is not None else _measured_iterations(inv)
    report = complexity_report(cfg, iterations)
    table = Table("detector", "order", "operations", "vs ddip-bpic", title=f"M={cfg.M} N={cfg.N} T={cfg.T} I={iterations:g}")
    for row in report.rows:
        ratio = report.ratio(row.detector)
        name = row.detector if row.implemented else f"{row.detector} (not run)"
        table.add_row(name, row.order, f"{row.operations:.4g}", "-" if ratio is None else f"{ratio:.2f}x")
    console.print(table)
    for other in ("ep", "mmse-bpic"):
        ratio = report.ratio(other)
        if ratio is not None:
            console.print(f"ddip-bpic needs {ratio:.2f}x fewer operations than {other}")
    console.print(f"bpicnet training (b = 5.12e6 samples): {report.bpicnet_training:.3g} operations")
    path = write_complexity_csv(_output(inv, written, "complexity.csv"), report)
    logger.info("wrote %s", path)


def _run_scale(inv: Invocation, written: list[Path]) -> None:
    cfg = inv.sim
    assert inv.scale_param is not None and inv.scale_snr_db is not None
    with _progress(cfg.frames * len(inv.scale_values), f"scale {inv.scale_param}") as advance:
        points = run_parameter_sweep(cfg, inv.scale_param, inv.scale_values, inv.scale_snr_db, advance)
    path = write_scale_csv(_output(inv, written, "scale.csv"), points)
    logger.info("wrote %s", path)
    for p in points:
        console.print(f"{p.param} = {p.value:<4}", end="")
        _print_ser_summary([p.point])


_RUNNERS: dict[str, Callable[[Invocation, list[Path]], None]] = {
    "sweep": _run_sweep,
    "cdf": _run_cdf,
    "trial": _run_trial,
    "complexity": _run_complexity,
    "scale": _run_scale,
}


def dispatch(inv: Invocation) -> int:
    """Run a validated invocation; returns 0 only when every output was written."""
    try:
        inv.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        console.print(f"[bold red]error:[/bold red] cannot create output directory: {escape(str(exc))}", soft_wrap=True)
        return 2
    handler = add_file_handler(inv.out_dir / "run.log")
    written: list[Path] = []
    try:
        logger.info("%s with %s (seed %d)", inv.subcommand, inv.config_path, inv.sim.seed)
        _RUNNERS[inv.subcommand](inv, written)
    except Exception as exc:
        logger.error("%s failed: %s", inv.subcommand, exc, exc_info=not isinstance(exc, DdipOtfsError))
        for path in written:
            if path.exists():
                path.unlink()
                logger.warning("removed partial output %s", path)
        return 1
    finally:
        remove_handler(handler)
    return 0


def _handle(ctx: typer.Context, build: Callable[[], Invocation]) -> Invocation:
    if ctx.obj == _PARSE_ONLY:
        return build()
    try:
        inv = build()
    except DdipOtfsError as exc:
        console.print(f"[bold red]error:[/bold red] {escape(str(exc))}", soft_wrap=True)
        raise typer.Exit(2)
    raise typer.Exit(dispatch(inv))


# fmt: off
@app.command(help="Measure SER versus SNR for every configured detector; writes ser.csv.")
def sweep(
    ctx: typer.Context,
    config: Path = typer.Option(DEFAULT_CONFIG_FILE, "-c", "--config", help="Config file (key = value or YAML)"),
    out: Path | None = typer.Option(None, "-o", "--out", help="Output directory [default: $DDIPOTFS_OUTPUT_DIR or ./results]", show_default=False),
    seed: int | None = typer.Option(None, "--seed", help="Override the config seed"),
    detectors: str | None = typer.Option(None, "--detectors", help="Comma-separated detector list, e.g. mmse,ddip-bpic"),
) -> Invocation:
    return _handle(ctx, lambda: build_invocation("sweep", config=config, out=out, seed=seed, detectors=detectors))


@app.command(help="Empirical CDF of the D-DIP stopping iteration; writes iteration_cdf.csv.")
def cdf(
    ctx: typer.Context,
    config: Path = typer.Option(DEFAULT_CONFIG_FILE, "-c", "--config", help="Config file (key = value or YAML)"),
    out: Path | None = typer.Option(None, "-o", "--out", help="Output directory", show_default=False),
    seed: int | None = typer.Option(None, "--seed", help="Override the config seed"),
    detectors: str | None = typer.Option(None, "--detectors", help="Comma-separated detector list; must include ddip-bpic"),
) -> Invocation:
    return _handle(ctx, lambda: build_invocation("cdf", config=config, out=out, seed=seed, detectors=detectors))


@app.command(help="Run frame 0 at the first configured SNR and show per-detector diagnostics.")
def trial(
    ctx: typer.Context,
    config: Path = typer.Option(DEFAULT_CONFIG_FILE, "-c", "--config", help="Config file (key = value or YAML)"),
    out: Path | None = typer.Option(None, "-o", "--out", help="Output directory", show_default=False),
    seed: int | None = typer.Option(None, "--seed", help="Override the config seed"),
    detectors: str | None = typer.Option(None, "--detectors", help="Comma-separated detector list"),
) -> Invocation:
    return _handle(ctx, lambda: build_invocation("trial", config=config, out=out, seed=seed, detectors=detectors))


@app.command(help="Operation-count comparison of the detectors; writes complexity.csv.")
def complexity(
    ctx: typer.Context,
    config: Path = typer.Option(DEFAULT_CONFIG_FILE, "-c", "--config", help="Config file (key = value or YAML)"),
    out: Path | None = typer.Option(None, "-o", "--out", help="Output directory", show_default=False),
    seed: int | None = typer.Option(None, "--seed", help="Override the config seed"),
    detectors: str | None = typer.Option(None, "--detectors", help="Comma-separated detector list"),
    iterations: float | None = typer.Option(None, "-I", "--iterations", help="Mean D-DIP iterations; measured with a ddip-bpic sweep when omitted"),
) -> Invocation:
    return _handle(ctx, lambda: build_invocation("complexity", config=config, out=out, seed=seed, detectors=detectors, iterations=iterations))


@app.command(help="SER at one SNR while M, P or k_max varies; writes scale.csv.")
def scale(
    ctx: typer.Context,
    param: str = typer.Option(..., "--param", help="Parameter to vary: M, P or k_max"),
    values: str = typer.Option(..., "--values", help="Comma-separated integer values"),
    snr: float = typer.Option(15.0, "--snr", help="SNR in dB"),
    config: Path = typer.Option(DEFAULT_CONFIG_FILE, "-c", "--config", help="Config file (key = value or YAML)"),
    out: Path | None = typer.Option(None, "-o", "--out", help="Output directory", show_default=False),
    seed: int | None = typer.Option(None, "--seed", help="Override the config seed"),
    detectors: str | None = typer.Option(None, "--detectors", help="Comma-separated detector list"),
) -> Invocation:
    return _handle(ctx, lambda: build_invocation("scale", config=config, out=out, seed=seed, detectors=detectors, param=param, values=values, snr=snr))
# fmt: on


if __name__ == "__main__":
    app()
