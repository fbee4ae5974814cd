"""MMSE denoiser and Bayesian parallel interference cancellation (BPIC).

Each BPIC iteration runs three stages on the real-valued model y = Hx + n:

* BSO - matched-filter interference cancellation giving a Gaussian
  observation (mu_q, Sigma_q) of every symbol;
* BSE - posterior mean/variance of every symbol over the real alphabet;
* DSC - error-weighted convex combination with the previous iteration.

The first iteration has no previous residual, so DSC starts at t = 2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ddipotfs.exceptions import DegenerateModelError, InputSizeError, ParameterError
from ddipotfs.link.channel import RealLinearModel
from ddipotfs.link.dd_frame import Constellation

SIGMA_FLOOR = 1e-30
"""Smallest BSO variance passed to BSE; keeps the noiseless case a hard decision."""


@dataclass(frozen=True)
class RealAlphabet:
    """Per-dimension symbol alphabet Ω, sorted ascending."""

    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2 or np.unique(points).size != points.size:
            raise ParameterError("a real alphabet needs at least two distinct points")
        object.__setattr__(self, "points", np.sort(points))

    @classmethod
    def from_constellation(cls, cons: Constellation) -> RealAlphabet:
        return cls(cons.real_levels)

    def decide(self, x: np.ndarray) -> np.ndarray:
        """Nearest point per entry; ties go to the smaller point."""
        return self.points[np.argmin(np.abs(np.asarray(x)[:, None] - self.points[None, :]), axis=1)]


@dataclass(frozen=True)
class BpicState:
    x_hat: np.ndarray
    v: np.ndarray
    mu: np.ndarray
    Sigma: np.ndarray
    e_prev: np.ndarray | None
    """Residual error of the previous iteration's BSE output (None at t = 1)."""
    e_curr: np.ndarray | None
    t: int
    x_prev: np.ndarray | None = None
    """Combined estimate of iteration t-1, consumed by DSC."""
    v_prev: np.ndarray | None = None
    rho: np.ndarray | None = None

    @property
    def mean_rho(self) -> float | None:
        """Average DSC weight of this iteration (None before DSC is active)."""
        return None if self.rho is None else float(np.mean(self.rho))


@dataclass(frozen=True)
class MatchedFilter:
    """Quantities of H reused by every BSO/DSC step."""

    H: np.ndarray
    gram: np.ndarray
    col_norm2: np.ndarray

    @classmethod
    def from_model(cls, model: RealLinearModel) -> MatchedFilter:
        gram = model.H.T @ model.H
        col_norm2 = np.diag(gram).copy()
        if np.any(col_norm2 <= 0):
            zero = int(np.flatnonzero(col_norm2 <= 0)[0])
            raise DegenerateModelError(f"column {zero} of H is zero; BSO is undefined")
        return cls(H=model.H, gram=gram, col_norm2=col_norm2)

    def projected_residual(self, model: RealLinearModel, x: np.ndarray) -> np.ndarray:
        """h_q^T (y - Hx) / ||h_q||² for every q."""
        return self.H.T @ (model.y - self.H @ x) / self.col_norm2


@dataclass(frozen=True)
class BpicResult:
    x_hat: np.ndarray
    v: np.ndarray
    trace: list[BpicState]
    symbol_errors: list[int]
    """Complex-symbol errors per iteration; empty when x_true is unknown."""


def mmse_denoise(model: RealLinearModel) -> np.ndarray:
    """x̂⁽⁰⁾ = (HᵀH + σ²I)⁻¹ Hᵀy; a singular system raises numpy's LinAlgError."""
    H = model.H
    A = H.T @ H + model.sigma2 * np.eye(model.size)
    return np.linalg.solve(A, H.T @ model.y)


def bso_step(
    model: RealLinearModel,
    x_hat_prev: np.ndarray,
    v_prev: np.ndarray,
    mf: MatchedFilter | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Bayesian symbol observation.

    mu_q    = x̂_q + h_qᵀ(y - Hx̂)/||h_q||²
    Sigma_q = (Σ_{j≠q} (h_qᵀh_j)² v_j + ||h_q||² σ²) / ||h_q||⁴
    """
    mf = mf or MatchedFilter.from_model(model)
    if x_hat_prev.shape != (model.size,) or v_prev.shape != (model.size,):
        raise InputSizeError(f"BSO inputs must have length {model.size}")
    mu = x_hat_prev + mf.projected_residual(model, x_hat_prev)
    gram2 = mf.gram**2
    interference = gram2 @ v_prev - mf.col_norm2**2 * v_prev
    Sigma = (interference + mf.col_norm2 * model.sigma2) / mf.col_norm2**2
    return mu, np.maximum(Sigma, 0.0)


def bse_posterior(mu: np.ndarray, Sigma: np.ndarray, alphabet: RealAlphabet) -> np.ndarray:
    """Normalised p̂(x_q = a) for every q (rows) and a ∈ Ω (columns)."""
    Sigma = np.maximum(np.asarray(Sigma, dtype=float), SIGMA_FLOOR)
    logits = -((np.asarray(mu)[:, None] - alphabet.points[None, :]) ** 2) / (2.0 * Sigma[:, None])
    logits -= logits.max(axis=1, keepdims=True)
    prob = np.exp(logits)
    return prob / prob.sum(axis=1, keepdims=True)


def bse_step(mu: np.ndarray, Sigma: np.ndarray, alphabet: RealAlphabet) -> tuple[np.ndarray, np.ndarray]:
    """Bayesian symbol estimation: posterior mean and variance over Ω."""
    prob = bse_posterior(mu, Sigma, alphabet)
    x_hat = prob @ alphabet.points
    v = np.sum(prob * (alphabet.points[None, :] - x_hat[:, None]) ** 2, axis=1)
    return x_hat, v


def dsc_step(state: BpicState, model: RealLinearModel, mf: MatchedFilter | None = None) -> BpicState:
    """Decision statistics combining.

    ``state.x_hat``/``state.v`` are this iteration's BSE output and
    ``state.x_prev``/``state.v_prev``/``state.e_prev`` the previous combined
    values. rho_q = e_prev/(e_curr + e_prev), and 1 when both errors are zero.
    """
    mf = mf or MatchedFilter.from_model(model)
    e_curr = mf.projected_residual(model, state.x_hat) ** 2
    if state.e_prev is None or state.x_prev is None or state.v_prev is None:
        return replace(state, e_curr=e_curr)
    total = e_curr + state.e_prev
    rho = np.ones_like(total)
    np.divide(state.e_prev, total, out=rho, where=total > 0)
    x_hat = (1.0 - rho) * state.x_prev + rho * state.x_hat
    v = (1.0 - rho) * state.v_prev + rho * state.v
    return replace(state, x_hat=x_hat, v=v, e_curr=e_curr, rho=rho)


def count_real_symbol_errors(x_hat: np.ndarray, x_true: np.ndarray, alphabet: RealAlphabet) -> int:
    """Complex-symbol errors between two stacked real vectors after hard decision."""
    wrong = alphabet.decide(x_hat) != alphabet.decide(x_true)
    half = wrong.size // 2
    return int(np.count_nonzero(wrong[:half] | wrong[half:]))


def run_bpic(model: RealLinearModel, x_init: np.ndarray, T: int, alphabet: RealAlphabet) -> BpicResult:
    """T iterations of BSO -> BSE -> DSC starting from x̂⁽⁰⁾ = x_init, v⁽⁰⁾ = 0."""
    if T < 1:
        raise ParameterError(f"BPIC needs T >= 1 iterations, got {T}")
    x_init = np.asarray(x_init, dtype=float)
    if x_init.shape != (model.size,):
        raise InputSizeError(f"x_init has shape {x_init.shape}, expected ({model.size},)")
    mf = MatchedFilter.from_model(model)
    x_hat, v = x_init, np.zeros(model.size)
    e_prev: np.ndarray | None = None
    trace: list[BpicState] = []
    errors: list[int] = []
    for t in range(1, T + 1):
        mu, Sigma = bso_step(model, x_hat, v, mf)
        x_bse, v_bse = bse_step(mu, Sigma, alphabet)
        state = BpicState(
            x_hat=x_bse,
            v=v_bse,
            mu=mu,
            Sigma=Sigma,
            e_prev=e_prev,
            e_curr=None,
            t=t,
            x_prev=x_hat if t > 1 else None,
            v_prev=v if t > 1 else None,
        )
        state = dsc_step(state, model, mf)
        trace.append(state)
        x_hat, v, e_prev = state.x_hat, state.v, state.e_curr
        if model.x_true is not None:
            errors.append(count_real_symbol_errors(x_hat, model.x_true, alphabet))
    return BpicResult(x_hat=x_hat, v=v, trace=trace, symbol_errors=errors)
