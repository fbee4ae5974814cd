"""CSV writers for sweep, CDF, scaling, trial and loss-trace results."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from pathlib import Path

from ddipotfs.detectors.ddip import LossTraceRow
from ddipotfs.sim.complexity import ComplexityReport
from ddipotfs.sim.harness import ScalePoint, SerPoint, TrialResult

SER_HEADER = ("detector", "snr_db", "frames", "symbol_errors", "ser", "ci_halfwidth")
CDF_HEADER = ("I", "cum_fraction")
SCALE_HEADER = ("param", "value", *SER_HEADER)
TRIAL_HEADER = ("detector", "snr_db", "symbol_errors", "symbols", "ddip_iterations")
LOSS_TRACE_HEADER = ("iteration", "loss", "variance")
COMPLEXITY_HEADER = ("detector", "order", "operations", "ratio_to_ddip_bpic")


def _ser_row(point: SerPoint) -> list[str]:
    return [
        point.detector,
        f"{point.snr_db:g}",
        str(point.frames),
        str(point.symbol_errors),
        f"{point.ser:.6e}",
        f"{point.ci_halfwidth:.6e}",
    ]


def _write(path: Path | str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_ser_csv(path: Path | str, points: Iterable[SerPoint]) -> Path:
    return _write(path, SER_HEADER, (_ser_row(p) for p in points))


def write_cdf_csv(path: Path | str, cdf: Iterable[tuple[int, float]]) -> Path:
    return _write(path, CDF_HEADER, ([str(i), f"{fraction:.6f}"] for i, fraction in cdf))


def write_scale_csv(path: Path | str, points: Iterable[ScalePoint]) -> Path:
    return _write(path, SCALE_HEADER, ([p.param, str(p.value), *_ser_row(p.point)] for p in points))


def write_trial_csv(path: Path | str, trial: TrialResult) -> Path:
    """Per-detector errors of one trial; wall times are only logged."""
    rows = []
    for name, outcome in trial.outcomes.items():
        iterations = outcome.ddip_iterations
        rows.append([
            name,
            f"{trial.snr_db:g}",
            str(outcome.symbol_errors),
            str(trial.symbols),
            "" if iterations is None else str(iterations),
        ])
    return _write(path, TRIAL_HEADER, rows)


def write_loss_trace_csv(path: Path | str, trace: Iterable[LossTraceRow]) -> Path:
    """Variance is left empty while the stopping window is still filling."""
    return _write(
        path,
        LOSS_TRACE_HEADER,
        ([str(row.iteration), f"{row.loss:.9e}", "" if row.variance is None else f"{row.variance:.9e}"] for row in trace),
    )


def write_complexity_csv(path: Path | str, report: ComplexityReport) -> Path:
    rows = []
    for row in report.rows:
        ratio = report.ratio(row.detector)
        rows.append([row.detector, row.order, f"{row.operations:.6g}", "" if ratio is None else f"{ratio:.4f}"])
    return _write(path, COMPLEXITY_HEADER, rows)
