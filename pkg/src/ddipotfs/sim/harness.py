"""Monte Carlo harness: one frame per trial, SER per (detector, SNR) per sweep."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ddipotfs.detectors import resolve_detector_class
from ddipotfs.detectors.bpic import RealAlphabet
from ddipotfs.detectors.ddip import LossTraceRow
from ddipotfs.detectors.pipelines import Detection
from ddipotfs.exceptions import DdipOtfsError, EmptyResultError, InputSizeError, ParameterError, TrialError
from ddipotfs.link.channel import (
    ChannelRealization,
    RealLinearModel,
    add_awgn,
    apply_channel_samplewise,
    effective_dd_matrix,
    sample_channel,
    snr_to_sigma2,
    to_real_model,
)
from ddipotfs.link.dd_frame import DDGrid, demodulate, hard_demap, map_bits, modulate
from ddipotfs.sim.config import SimConfig, apply_overrides
from ddipotfs.sim.rng import frame_rng, frame_streams

logger = logging.getLogger("ddipotfs.sim")

WILSON_Z = 1.959963984540054
SCALABLE_PARAMS = ("M", "P", "k_max")

ProgressCallback = Callable[[int], None]


@dataclass(frozen=True)
class FrameRealization:
    """Everything the detectors of one trial share."""

    truth: DDGrid
    channel: ChannelRealization
    model: RealLinearModel
    sigma_c2: float


@dataclass(frozen=True)
class DetectorOutcome:
    name: str
    symbol_errors: int
    seconds: float
    decided: DDGrid
    detection: Detection

    @property
    def ddip_iterations(self) -> int | None:
        return self.detection.ddip_iterations

    @property
    def loss_trace(self) -> list[LossTraceRow]:
        return [] if self.detection.ddip is None else self.detection.ddip.loss_trace


@dataclass(frozen=True)
class TrialResult:
    frame: int
    snr_db: float
    symbols: int
    """MN complex symbols per frame."""
    realization: FrameRealization
    outcomes: dict[str, DetectorOutcome]
    stage_seconds: dict[str, float]
    """Wall time of the shared link stage ("link") and of every detector."""

    @property
    def errors(self) -> dict[str, int]:
        return {name: outcome.symbol_errors for name, outcome in self.outcomes.items()}

    @property
    def ddip_iterations(self) -> int | None:
        outcome = self.outcomes.get("ddip-bpic")
        return None if outcome is None else outcome.ddip_iterations

    @property
    def ddip_truncated(self) -> bool:
        outcome = self.outcomes.get("ddip-bpic")
        return bool(outcome and outcome.detection.ddip and outcome.detection.ddip.truncated)


@dataclass(frozen=True)
class SerPoint:
    detector: str
    snr_db: float
    frames: int
    symbol_errors: int
    symbols: int
    """Total complex symbols tested (frames x MN)."""

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols

    @property
    def ci_halfwidth(self) -> float:
        return wilson_halfwidth(self.symbol_errors, self.symbols)


@dataclass
class SweepResult:
    points: list[SerPoint] = field(default_factory=list)
    iterations: dict[float, list[int]] = field(default_factory=dict)
    """D-DIP stopping iterations per SNR, in frame order."""
    truncated: int = 0
    """Frames whose D-DIP run hit the iteration cap."""
    trials: list[TrialResult] = field(default_factory=list)
    """Per-frame results, kept only when requested."""

    def point(self, detector: str, snr_db: float) -> SerPoint:
        for point in self.points:
            if point.detector == detector and point.snr_db == snr_db:
                return point
        raise EmptyResultError(f"no SER point for {detector} at {snr_db:g} dB")

    def iteration_counts(self, snr_db: float | None = None) -> list[int]:
        if snr_db is not None:
            return list(self.iterations.get(snr_db, []))
        return [count for counts in self.iterations.values() for count in counts]


@dataclass(frozen=True)
class ScalePoint:
    param: str
    value: int
    point: SerPoint


@dataclass(frozen=True)
class FrameTiming:
    bandwidth_hz: float
    duration_s: float
    cp_samples: int
    sample_period_s: float


def wilson_halfwidth(errors: int, trials: int, z: float = WILSON_Z) -> float:
    """Half-width of the Wilson score interval for `errors` successes in `trials`."""
    if trials < 1:
        raise ParameterError(f"a confidence interval needs at least one trial, got {trials}")
    p = errors / trials
    denom = 1.0 + z * z / trials
    return z / denom * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))


def count_symbol_errors(decided: DDGrid | np.ndarray, truth: DDGrid | np.ndarray) -> int:
    """Number of DD grid positions whose decided symbol differs from the transmitted one."""
    a = decided.entries if isinstance(decided, DDGrid) else np.asarray(decided)
    b = truth.entries if isinstance(truth, DDGrid) else np.asarray(truth)
    if a.shape != b.shape:
        raise InputSizeError(f"decided grid {a.shape} and truth {b.shape} differ in shape")
    return int(np.count_nonzero(a != b))


def frame_timing(cfg: SimConfig) -> FrameTiming:
    """Bandwidth M·Δf and duration N·T_s + N_cp·T_s/M with an l_max-sample prefix."""
    symbol_period = 1.0 / cfg.delta_f
    cp = cfg.delay_spread
    return FrameTiming(
        bandwidth_hz=cfg.M * cfg.delta_f,
        duration_s=cfg.N * symbol_period + cp * symbol_period / cfg.M,
        cp_samples=cp,
        sample_period_s=symbol_period / cfg.M,
    )


def simulate_frame(
    cfg: SimConfig, snr_db: float, bits_rng: np.random.Generator, channel_rng: np.random.Generator,
    noise_rng: np.random.Generator,
) -> FrameRealization:
    """Bits -> DD grid -> time signal -> channel + noise -> real DD model."""
    cons = cfg.constellation()
    bits = bits_rng.integers(0, 2, size=cfg.symbols_per_frame * cons.bits_per_symbol)
    grid = map_bits(bits, cons, cfg.M, cfg.N)
    channel = sample_channel(cfg.P, cfg.delay_spread, cfg.k_max, cfg.M, cfg.N, channel_rng)
    sigma_c2 = snr_to_sigma2(snr_db)
    received = add_awgn(apply_channel_samplewise(modulate(grid, cfg.delta_f), channel), sigma_c2, noise_rng)
    model = to_real_model(effective_dd_matrix(channel), demodulate(received).vectorized, sigma_c2, grid.vectorized)
    return FrameRealization(truth=grid, channel=channel, model=model, sigma_c2=sigma_c2)


def run_trial(cfg: SimConfig, snr_db: float, rng: np.random.Generator, *, frame: int = 0) -> TrialResult:
    """Run every configured detector on one shared frame realization."""
    streams = frame_streams(rng)
    cons = cfg.constellation()
    alphabet = RealAlphabet.from_constellation(cons)
    ddip_config = cfg.ddip_config()
    try:
        start = time.perf_counter()
        realization = simulate_frame(cfg, snr_db, streams.bits, streams.channel, streams.noise)
        stage_seconds = {"link": time.perf_counter() - start}
        outcomes: dict[str, DetectorOutcome] = {}
        for name in cfg.detectors:
            detector = resolve_detector_class(name)(alphabet=alphabet, T=cfg.T, ddip_config=ddip_config)
            start = time.perf_counter()
            detection = detector.detect(realization.model, streams.ddip)
            decided, _ = hard_demap(detection.x_hat, cons, cfg.M)
            stage_seconds[name] = time.perf_counter() - start
            outcomes[name] = DetectorOutcome(
                name=name,
                symbol_errors=count_symbol_errors(decided, realization.truth),
                seconds=stage_seconds[name],
                decided=decided,
                detection=detection,
            )
    except (DdipOtfsError, np.linalg.LinAlgError) as exc:
        raise TrialError(str(exc), frame=frame, snr_db=snr_db) from exc
    result = TrialResult(
        frame=frame,
        snr_db=snr_db,
        symbols=cfg.symbols_per_frame,
        realization=realization,
        outcomes=outcomes,
        stage_seconds=stage_seconds,
    )
    logger.debug("frame %d at %g dB: errors %s, seconds %s", frame, snr_db, result.errors, {k: round(v, 4) for k, v in stage_seconds.items()})
    return result


def _run_frames(cfg: SimConfig, snr_db: float, progress: ProgressCallback | None) -> list[TrialResult]:
    def one(frame: int) -> TrialResult:
        result = run_trial(cfg, snr_db, frame_rng(cfg.seed, frame), frame=frame)
        if progress is not None:
            progress(1)
        return result

    if cfg.workers == 1:
        return [one(frame) for frame in range(cfg.frames)]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(one, range(cfg.frames)))


def run_sweep(cfg: SimConfig, progress: ProgressCallback | None = None, *, keep_trials: bool = False) -> SweepResult:
    """Run `cfg.frames` frames at every SNR and aggregate SER per detector.

    Frame f draws the same bits, channel and normalised noise at every SNR.
    """
    sweep = SweepResult()
    symbols = cfg.symbols_per_frame
    for snr_db in cfg.snr_db_list:
        trials = _run_frames(cfg, snr_db, progress)
        for name in cfg.detectors:
            point = SerPoint(
                detector=name,
                snr_db=snr_db,
                frames=len(trials),
                symbol_errors=sum(trial.errors[name] for trial in trials),
                symbols=len(trials) * symbols,
            )
            sweep.points.append(point)
            logger.info("%s at %g dB: SER %.3e ± %.1e over %d frames", name, snr_db, point.ser, point.ci_halfwidth, point.frames)
        if "ddip-bpic" in cfg.detectors:
            sweep.iterations[snr_db] = [trial.ddip_iterations for trial in trials]
            sweep.truncated += sum(trial.ddip_truncated for trial in trials)
        if keep_trials:
            sweep.trials.extend(trials)
    return sweep


def iteration_cdf(sweep: SweepResult, snr_db: float | None = None) -> list[tuple[int, float]]:
    """Empirical CDF of the D-DIP stopping iteration I as (I, cumulative fraction) steps."""
    counts = sweep.iteration_counts(snr_db)
    if not counts:
        raise EmptyResultError("no D-DIP stopping iterations recorded; ddip-bpic must be among the detectors")
    values, occurrences = np.unique(np.asarray(counts), return_counts=True)
    cumulative = np.cumsum(occurrences)
    return [(int(value), float(c / cumulative[-1])) for value, c in zip(values, cumulative)]


def median_iterations(sweep: SweepResult, snr_db: float | None = None) -> float:
    counts = sweep.iteration_counts(snr_db)
    if not counts:
        raise EmptyResultError("no D-DIP stopping iterations recorded")
    return float(np.median(counts))


def snr_at_ser(sweep: SweepResult, detector: str, target_ser: float) -> float:
    """SNR in dB at which `detector` first reaches `target_ser`.

    log10(SER) is interpolated linearly between neighbouring sweep points. A
    sweep that already starts at or below the target returns its lowest SNR, and
    a point with zero errors counts as reaching the target at that point.
    """
    if not 0 < target_ser < 1:
        raise ParameterError(f"target SER must lie in (0, 1), got {target_ser:g}")
    points = sorted((p for p in sweep.points if p.detector == detector), key=lambda p: p.snr_db)
    if not points:
        raise EmptyResultError(f"no SER points for {detector}")
    if points[0].ser <= target_ser:
        return points[0].snr_db
    for low, high in zip(points, points[1:]):
        if high.ser > target_ser:
            continue
        if high.ser == 0:
            return high.snr_db
        drop = math.log10(low.ser) - math.log10(high.ser)
        fraction = (math.log10(low.ser) - math.log10(target_ser)) / drop
        return low.snr_db + fraction * (high.snr_db - low.snr_db)
    span = f"{points[0].snr_db:g} to {points[-1].snr_db:g} dB"
    raise EmptyResultError(f"{detector} never reaches SER {target_ser:g} from {span}")


def run_parameter_sweep(
    cfg: SimConfig,
    param: str,
    values: Sequence[int],
    snr_db: float,
    progress: ProgressCallback | None = None,
) -> list[ScalePoint]:
    """Measure SER at one SNR while one of M, P or k_max takes each of `values`."""
    if param not in SCALABLE_PARAMS:
        raise ParameterError(f"cannot sweep {param!r}; choose one of {', '.join(SCALABLE_PARAMS)}")
    if not values:
        raise ParameterError("parameter sweep needs at least one value")
    scaled: list[ScalePoint] = []
    for value in values:
        point_cfg = apply_overrides(cfg, **{param: int(value), "snr_db_list": [snr_db]})
        logger.info("%s = %d", param, value)
        for point in run_sweep(point_cfg, progress).points:
            scaled.append(ScalePoint(param=param, value=int(value), point=point))
    return scaled
