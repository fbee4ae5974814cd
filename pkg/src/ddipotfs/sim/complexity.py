"""Operation-count estimates of the detectors, evaluated from their order expressions.

Only MMSE, MMSE-BPIC and D-DIP-BPIC are implemented; EP, UAMP and BPICNet are
listed for comparison and never run.
"""

from __future__ import annotations

from dataclasses import dataclass

from ddipotfs.exceptions import ParameterError
from ddipotfs.sim.config import SimConfig

REFERENCE = "ddip-bpic"
BPICNET_TRAINING_SAMPLES = 5_120_000


@dataclass(frozen=True)
class ComplexityRow:
    detector: str
    order: str
    operations: float
    implemented: bool


@dataclass(frozen=True)
class ComplexityReport:
    M: int
    N: int
    T: int
    iterations: float
    """Mean D-DIP stopping iteration I."""
    rows: tuple[ComplexityRow, ...]

    def operations(self, detector: str) -> float:
        for row in self.rows:
            if row.detector == detector:
                return row.operations
        raise ParameterError(f"no complexity entry for {detector!r}")

    def ratio(self, detector: str, reference: str = REFERENCE) -> float | None:
        """operations(detector) / operations(reference); None when the reference count is zero."""
        base = self.operations(reference)
        if base == 0:
            return None
        return self.operations(detector) / base

    @property
    def bpicnet_training(self) -> float:
        """Training cost b·(M³N³ + MN + M²N²T) for b training samples."""
        return BPICNET_TRAINING_SAMPLES * self.operations("bpicnet")


def operation_counts(M: int, N: int, T: int, iterations: float) -> ComplexityReport:
    """Evaluate every detector's order expression at the given M, N, T and mean iteration count I."""
    if M < 1 or N < 1:
        raise ParameterError(f"M and N must be >= 1, got M={M}, N={N}")
    if T < 0 or iterations < 0:
        raise ParameterError(f"T and I must be >= 0, got T={T}, I={iterations}")
    mn = M * N
    cube, square = float(mn**3), float(mn**2)
    rows = (
        ComplexityRow("mmse", "M³N³", cube, True),
        ComplexityRow("mmse-bpic", "M³N³ + M²N²T", cube + square * T, True),
        ComplexityRow("ddip-bpic", "M²N²I + M²N²T", square * iterations + square * T, True),
        ComplexityRow("ep", "M³N³T", cube * T, False),
        ComplexityRow("uamp", "M³N³ + M²N²T", cube + square * T, False),
        ComplexityRow("bpicnet", "M³N³ + MN + M²N²T", cube + mn + square * T, False),
    )
    return ComplexityReport(M=M, N=N, T=T, iterations=float(iterations), rows=rows)


def complexity_report(cfg: SimConfig, iterations: float) -> ComplexityReport:
    """Operation counts for the frame size and BPIC depth of `cfg`, with I measured elsewhere."""
    return operation_counts(cfg.M, cfg.N, cfg.T, iterations)
