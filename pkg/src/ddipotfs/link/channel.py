"""Doubly dispersive channel with integer delay/Doppler taps and its DD-domain models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ddipotfs.exceptions import InputSizeError, ParameterError
from ddipotfs.link.dd_frame import DEFAULT_DELTA_F, TimeSignal, dft_matrix, stack_real


@dataclass(frozen=True)
class PathParams:
    gain: complex
    delay_index: int
    doppler_index: int

    def delay_seconds(self, M: int, delta_f: float = DEFAULT_DELTA_F) -> float:
        """τ = l·T_s/M with T_s = 1/Δf."""
        return self.delay_index / (M * delta_f)

    def doppler_hz(self, N: int, delta_f: float = DEFAULT_DELTA_F) -> float:
        """ν = k·Δf/N."""
        return self.doppler_index * delta_f / N


@dataclass(frozen=True)
class ChannelRealization:
    """P paths on an M x N grid; every (delay, Doppler) pair is distinct."""

    paths: tuple[PathParams, ...]
    M: int
    N: int

    def __post_init__(self) -> None:
        if not self.paths:
            raise ParameterError("a channel realization needs at least one path (P >= 1)")
        pairs = {(p.delay_index, p.doppler_index) for p in self.paths}
        if len(pairs) != len(self.paths):
            raise ParameterError("delay/Doppler index pairs must be distinct across paths")
        for p in self.paths:
            if not 0 <= p.delay_index <= self.M - 1:
                raise ParameterError(f"delay index {p.delay_index} outside [0, M-1={self.M - 1}]")
            if abs(p.doppler_index) > self.N // 2:
                raise ParameterError(f"Doppler index {p.doppler_index} exceeds floor(N/2)={self.N // 2}")

    @property
    def P(self) -> int:
        return len(self.paths)

    @property
    def size(self) -> int:
        return self.M * self.N

    def to_text(self) -> str:
        lines = [f"# M={self.M} N={self.N}", "# re(h) im(h) l k"]
        for p in self.paths:
            gain = complex(p.gain)
            lines.append(f"{gain.real!r} {gain.imag!r} {p.delay_index} {p.doppler_index}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ChannelRealization:
        M = N = None
        paths = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "M":
                        M = int(value)
                    elif key == "N":
                        N = int(value)
                continue
            re_h, im_h, l, k = line.split()
            paths.append(PathParams(complex(float(re_h), float(im_h)), int(l), int(k)))
        if M is None or N is None:
            raise InputSizeError("channel text is missing the '# M=.. N=..' header")
        return cls(paths=tuple(paths), M=M, N=N)

    def describe(self, delta_f: float = DEFAULT_DELTA_F) -> list[dict[str, float]]:
        """Physical delay/Doppler values per path, for display only."""
        return [
            {
                "gain_abs": abs(p.gain),
                "delay_index": p.delay_index,
                "doppler_index": p.doppler_index,
                "delay_us": p.delay_seconds(self.M, delta_f) * 1e6,
                "doppler_hz": p.doppler_hz(self.N, delta_f),
            }
            for p in self.paths
        ]


@dataclass(frozen=True)
class RealLinearModel:
    """y = H x + n with x, y in R^{2MN} (stacked [Re; Im])."""

    H: np.ndarray
    y: np.ndarray
    sigma2: float
    """Noise variance per real dimension (σ_c²/2)."""
    x_true: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        n = self.H.shape[0]
        if self.H.shape != (n, n) or self.y.shape != (n,):
            raise InputSizeError(f"inconsistent model shapes H={self.H.shape} y={self.y.shape}")
        if self.x_true is not None and self.x_true.shape != (n,):
            raise InputSizeError(f"x_true has shape {self.x_true.shape}, expected ({n},)")
        if self.sigma2 < 0:
            raise ParameterError(f"noise variance must be >= 0, got {self.sigma2}")

    @property
    def size(self) -> int:
        return self.y.size

    def complex_matrix(self) -> np.ndarray:
        """Recover H_DD from the [Re -Im; Im Re] block layout."""
        half = self.size // 2
        return self.H[:half, :half] + 1j * self.H[half:, :half]


def sample_channel(
    P: int, l_max: int, k_max: int, M: int, N: int, rng: np.random.Generator
) -> ChannelRealization:
    """Draw P distinct (l, k) pairs uniformly and i.i.d. CN(0, 1/P) gains."""
    if P < 1:
        raise ParameterError(f"P must be >= 1, got {P}")
    if not 0 <= l_max <= M - 1:
        raise ParameterError(f"l_max must satisfy 0 <= l_max <= M-1 = {M - 1}, got {l_max}")
    if not 0 <= k_max <= N // 2:
        raise ParameterError(f"k_max must satisfy 0 <= k_max <= floor(N/2) = {N // 2}, got {k_max}")
    n_pairs = (l_max + 1) * (2 * k_max + 1)
    if P > n_pairs:
        raise ParameterError(
            f"P={P} exceeds the {n_pairs} distinct delay/Doppler pairs (l_max+1)(2k_max+1)"
        )
    picks = rng.choice(n_pairs, size=P, replace=False)
    delays = picks // (2 * k_max + 1)
    dopplers = picks % (2 * k_max + 1) - k_max
    gains = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * math.sqrt(0.5 / P)
    paths = tuple(
        PathParams(complex(g), int(l), int(k)) for g, l, k in zip(gains, delays, dopplers)
    )
    return ChannelRealization(paths=paths, M=M, N=N)


def time_domain_matrix(ch: ChannelRealization) -> np.ndarray:
    """H = Σ h_i Π^{l_i} Δ(k_i), Π the circular delay and Δ(k) = diag(e^{j2πkn/MN})."""
    size = ch.size
    n = np.arange(size)
    identity = np.eye(size, dtype=complex)
    H = np.zeros((size, size), dtype=complex)
    for p in ch.paths:
        doppler = np.exp(2j * np.pi * p.doppler_index * n / size)
        H += p.gain * np.roll(identity, p.delay_index, axis=0) * doppler[None, :]
    return H


def apply_channel_samplewise(signal: TimeSignal, ch: ChannelRealization) -> TimeSignal:
    """r(n) = Σ h_i e^{j2πk_i(n-l_i)/MN} s([n-l_i]_MN), noise excluded."""
    s = np.asarray(signal.samples, dtype=complex)
    if s.size != ch.size:
        raise InputSizeError(f"signal has {s.size} samples, channel expects {ch.size}")
    n = np.arange(ch.size)
    r = np.zeros_like(s)
    for p in ch.paths:
        phase = np.exp(2j * np.pi * p.doppler_index * (n - p.delay_index) / ch.size)
        r += p.gain * phase * np.roll(s, p.delay_index)
    return signal.with_samples(r)


def effective_dd_matrix(ch: ChannelRealization) -> np.ndarray:
    """H_DD = (F_N ⊗ I_M) H (F_N^H ⊗ I_M)."""
    A = np.kron(dft_matrix(ch.N), np.eye(ch.M))
    return A @ time_domain_matrix(ch) @ A.conj().T


def snr_to_sigma2(snr_db: float) -> float:
    """SNR = 10 log10(1/σ_c²); +inf maps to a noiseless link."""
    return 10.0 ** (-snr_db / 10.0)


def add_awgn(signal: TimeSignal, sigma_c2: float, rng: np.random.Generator) -> TimeSignal:
    """Add CN(0, σ_c²) noise per sample.

    The unit-variance draw is taken even when σ_c² = 0, so one RNG stream
    yields the same normalised noise at every SNR.
    """
    if sigma_c2 < 0:
        raise ParameterError(f"noise variance must be >= 0, got {sigma_c2}")
    shape = np.shape(signal.samples)
    unit = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    if sigma_c2 == 0:
        return signal
    return signal.with_samples(signal.samples + math.sqrt(sigma_c2) * unit)


def to_real_model(
    H_DD: np.ndarray, y_DD: np.ndarray, sigma_c2: float, x_DD: np.ndarray | None = None
) -> RealLinearModel:
    """Stack the complex DD model into the real 2MN-dimensional one."""
    H_DD = np.asarray(H_DD, dtype=complex)
    y_DD = np.asarray(y_DD, dtype=complex)
    if H_DD.shape != (y_DD.size, y_DD.size):
        raise InputSizeError(f"H_DD shape {H_DD.shape} does not match y_DD length {y_DD.size}")
    H = np.block([[H_DD.real, -H_DD.imag], [H_DD.imag, H_DD.real]])
    x = None if x_DD is None else stack_real(np.asarray(x_DD, dtype=complex))
    return RealLinearModel(H=H, y=stack_real(y_DD), sigma2=sigma_c2 / 2.0, x_true=x)
