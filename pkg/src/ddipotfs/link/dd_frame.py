"""Delay-Doppler framing: QAM mapping and the DD <-> TF <-> time transforms.

All matrices use column-major ("column-wise") vectorization: entry ``(m, n)`` of
an ``M x N`` grid is element ``m + n*M`` of the vector. Pulses are rectangular
on both sides (``G_tx = G_rx = I_M``), so the Heisenberg and Wigner transforms
reduce to an M-point IDFT/DFT along the delay axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ddipotfs.exceptions import InputSizeError, ParameterError

DEFAULT_DELTA_F = 15e3


def dft_matrix(n: int) -> np.ndarray:
    """Unitary n-point DFT matrix, entry (p, q) = exp(-j2πpq/n)/√n."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / math.sqrt(n)


def vectorize(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).reshape(-1, order="F")


def devectorize(vector: np.ndarray, M: int, N: int) -> np.ndarray:
    vector = np.asarray(vector)
    if vector.size != M * N:
        raise InputSizeError(f"cannot fold a length-{vector.size} vector into a {M}x{N} grid")
    return vector.reshape(M, N, order="F")


def stack_real(z: np.ndarray) -> np.ndarray:
    """Complex length-n vector -> real length-2n vector [Re; Im]."""
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag]).astype(float)


def unstack_real(x: np.ndarray) -> np.ndarray:
    """Inverse of `stack_real`."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 2:
        raise InputSizeError(f"real-model vector must have even length, got shape {x.shape}")
    half = x.size // 2
    return x[:half] + 1j * x[half:]


def _gray_to_binary(value: int) -> int:
    result = value
    shift = value >> 1
    while shift:
        result ^= shift
        shift >>= 1
    return result


@dataclass(frozen=True)
class Constellation:
    """Square QAM alphabet with unit average symbol energy.

    ``points[s]`` is the point transmitted for the symbol whose bit label,
    read as a big-endian integer, equals ``s``. The first half of the label
    selects the in-phase level and the second half the quadrature level, each
    Gray coded so neighbouring levels differ in one bit.
    """

    points: np.ndarray
    c: float
    """Largest per-dimension amplitude (1/√2 for 4-QAM)."""

    @classmethod
    def square_qam(cls, Q: int = 4) -> Constellation:
        bits = int(round(math.log2(Q))) if Q > 1 else 0
        if Q < 4 or 2**bits != Q or bits % 2:
            raise ParameterError(f"square QAM needs Q to be a power of 4 (>= 4), got {Q}")
        per_dim_bits = bits // 2
        levels = 2**per_dim_bits
        spacing = math.sqrt(3.0 / (2.0 * (Q - 1)))
        amplitudes = np.array(
            [(levels - 1 - 2 * _gray_to_binary(label)) * spacing for label in range(levels)]
        )
        points = np.array(
            [
                amplitudes[s >> per_dim_bits] + 1j * amplitudes[s & (levels - 1)]
                for s in range(Q)
            ]
        )
        points.setflags(write=False)
        return cls(points=points, c=(levels - 1) * spacing)

    @property
    def Q(self) -> int:
        return int(self.points.size)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.Q)))

    @property
    def real_levels(self) -> np.ndarray:
        """Sorted per-dimension amplitudes (the real alphabet Ω)."""
        return np.unique(self.points.real)

    @property
    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


@dataclass(frozen=True)
class DDGrid:
    """An M x N complex grid (delay along rows, Doppler along columns)."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        if np.ndim(self.entries) != 2:
            raise InputSizeError(f"DD grid must be 2-D, got shape {np.shape(self.entries)}")

    @classmethod
    def from_vector(cls, vector: np.ndarray, M: int, N: int) -> DDGrid:
        return cls(devectorize(np.asarray(vector, dtype=complex), M, N))

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    @property
    def vectorized(self) -> np.ndarray:
        return vectorize(self.entries)


@dataclass(frozen=True)
class TimeSignal:
    """MN time-domain samples; the cyclic prefix is implicit."""

    samples: np.ndarray
    M: int
    """Samples per block (subcarrier count)."""
    sample_period: float | None = None
    """T_s/M in seconds, when known."""

    def __len__(self) -> int:
        return int(self.samples.size)

    def with_samples(self, samples: np.ndarray) -> TimeSignal:
        return TimeSignal(samples=samples, M=self.M, sample_period=self.sample_period)


def map_bits(bits: np.ndarray, cons: Constellation, M: int, N: int) -> DDGrid:
    """Map a bit stream onto an M x N DD grid, column-major."""
    bits = np.asarray(bits).astype(np.int64).ravel()
    k = cons.bits_per_symbol
    expected = M * N * k
    if bits.size != expected:
        raise InputSizeError(f"expected {expected} bits for a {M}x{N} grid of {cons.Q}-QAM, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise InputSizeError("bit stream may only contain 0 and 1")
    weights = 1 << np.arange(k - 1, -1, -1)
    symbols = bits.reshape(M * N, k) @ weights
    return DDGrid.from_vector(cons.points[symbols], M, N)


def isfft(grid: DDGrid) -> DDGrid:
    """X_TF = F_M X_DD F_N^H."""
    tf = np.fft.fft(grid.entries, axis=0, norm="ortho")
    return DDGrid(np.fft.ifft(tf, axis=1, norm="ortho"))


def sfft(grid: DDGrid) -> DDGrid:
    """Y_DD = F_M^H Y_TF F_N."""
    dd = np.fft.ifft(grid.entries, axis=0, norm="ortho")
    return DDGrid(np.fft.fft(dd, axis=1, norm="ortho"))


def modulate(grid: DDGrid, delta_f: float = DEFAULT_DELTA_F) -> TimeSignal:
    """ISFFT followed by the Heisenberg transform: s = (F_N^H ⊗ I_M) x_DD."""
    tf = isfft(grid)
    samples = vectorize(np.fft.ifft(tf.entries, axis=0, norm="ortho"))
    return TimeSignal(samples=samples, M=grid.M, sample_period=1.0 / (delta_f * grid.M))


def demodulate(signal: TimeSignal) -> DDGrid:
    """Wigner transform followed by the SFFT: y_DD = (F_N ⊗ I_M) r."""
    M = signal.M
    samples = np.asarray(signal.samples, dtype=complex)
    if samples.size % M:
        raise InputSizeError(f"{samples.size} samples do not fill whole blocks of M={M}")
    received = devectorize(samples, M, samples.size // M)
    tf = DDGrid(np.fft.fft(received, axis=0, norm="ortho"))
    return sfft(tf)


def hard_demap(x_hat: np.ndarray, cons: Constellation, M: int) -> tuple[DDGrid, np.ndarray]:
    """Minimum-distance decision on a real-model estimate.

    Ties go to the lexicographically smallest (real, imag) point.
    Returns the decided grid and the corresponding bit stream.
    """
    z = unstack_real(x_hat)
    if z.size % M:
        raise InputSizeError(f"{z.size} symbols do not fill whole columns of M={M}")
    order = np.lexsort((cons.points.imag, cons.points.real))
    candidates = cons.points[order]
    distances = np.abs(z[:, None] - candidates[None, :]) ** 2
    symbols = order[np.argmin(distances, axis=1)]
    k = cons.bits_per_symbol
    bits = (symbols[:, None] >> np.arange(k - 1, -1, -1)) & 1
    grid = DDGrid.from_vector(cons.points[symbols], M, z.size // M)
    return grid, bits.reshape(-1).astype(np.int8)
