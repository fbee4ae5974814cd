"""Decoder-only deep image prior (D-DIP) symbol denoiser.

An untrained fully connected decoder maps a fixed random seed vector z0 to a
2MN-dimensional output ``c * tanh(...)``. Its weights are fitted to the single
observation y by minimising ||H x - y||² / 2MN with Adam, and fitting stops as
soon as the output stops moving (windowed output variance below a threshold).
The final output is the initial estimate handed to BPIC.

Backpropagation is written out by hand; the network is small enough that
numpy matrix-vector products are all that is needed.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel

from ddipotfs.exceptions import InputSizeError, ParameterError
from ddipotfs.link.channel import RealLinearModel

logger = logging.getLogger("ddipotfs.ddip")

HIDDEN_SIZES = (4, 8, 16, 32)


class DdipConfig(BaseModel):
    window: int = 30
    """W: number of recent outputs in the stopping variance."""
    threshold: float = 1e-3
    """ε: fitting stops once the windowed variance drops below this."""
    lr: float = 0.01
    """Adam learning rate."""
    cap: int = 500
    """Hard iteration cap; reaching it returns the current output flagged as truncated."""
    c: float = 1.0 / math.sqrt(2.0)
    """Output scale; the largest per-dimension constellation amplitude."""
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES
    """Neuron counts of every layer before the 2MN-wide output layer (input first)."""


@dataclass
class DecoderNet:
    """Fully connected tanh decoder; layer l maps p_{l-1} -> p_l neurons."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    z0: np.ndarray
    c: float

    def __post_init__(self) -> None:
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise InputSizeError(f"{len(sizes)} layers need {len(sizes) - 1} weight/bias pairs")
        for l, (W, b) in enumerate(zip(self.weights, self.biases), start=1):
            if W.shape != (sizes[l], sizes[l - 1]) or b.shape != (sizes[l],):
                raise InputSizeError(
                    f"layer {l + 1}: expected W {(sizes[l], sizes[l - 1])} and b {(sizes[l],)}, "
                    f"got {W.shape} and {b.shape}"
                )
        if self.z0.shape != (sizes[0],):
            raise InputSizeError(f"z0 must have shape ({sizes[0]},), got {self.z0.shape}")
        self.z0 = np.array(self.z0, dtype=float)
        self.z0.setflags(write=False)

    @classmethod
    def random(cls, layer_sizes: tuple[int, ...], c: float, rng: np.random.Generator) -> DecoderNet:
        """z0 ~ N(0, I); W_l, b_l ~ U(-1/√p_l, 1/√p_l) with p_l the width of layer l itself."""
        sizes = tuple(int(p) for p in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ParameterError(f"invalid layer sizes {sizes}")
        z0 = rng.standard_normal(sizes[0])
        weights, biases = [], []
        for p_in, p_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(p_out)
            weights.append(rng.uniform(-bound, bound, size=(p_out, p_in)))
            biases.append(rng.uniform(-bound, bound, size=p_out))
        return cls(layer_sizes=sizes, weights=weights, biases=biases, z0=z0, c=c)

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """[W_2, b_2, W_3, b_3, ...] as live references."""
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def activations(self) -> list[np.ndarray]:
        """[f_1 = z0, f_2, ..., f_L]."""
        outputs = [self.z0]
        for W, b in zip(self.weights, self.biases):
            outputs.append(np.tanh(W @ outputs[-1] + b))
        return outputs


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: list[np.ndarray], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            m=[np.zeros_like(p, dtype=float) for p in params],
            v=[np.zeros_like(p, dtype=float) for p in params],
        )


class StopDecision(str, Enum):
    CONTINUE = "continue"
    STOP = "stop"


class StopMonitor:
    """Windowed output variance; inactive until W outputs have been seen."""

    def __init__(self, window: int, threshold: float):
        if window < 1:
            raise ParameterError(f"stopping window must be >= 1, got {window}")
        self.window = window
        self.threshold = threshold
        self.history: deque[np.ndarray] = deque(maxlen=window)
        self.count = 0
        self.last_variance: float | None = None

    @property
    def active(self) -> bool:
        return self.count >= self.window


@dataclass(frozen=True)
class LossTraceRow:
    iteration: int
    loss: float
    variance: float | None


@dataclass(frozen=True)
class DdipResult:
    x_init: np.ndarray
    iterations: int
    """I: number of D-DIP iterations run (outputs produced)."""
    loss_trace: list[LossTraceRow]
    truncated: bool
    """True when the cap was reached before the stopping rule fired."""
    net: DecoderNet
    """The fitted decoder; forward(net) is x_init."""


def init_net(
    M: int, N: int, c: float, rng: np.random.Generator, hidden_sizes: tuple[int, ...] = HIDDEN_SIZES
) -> DecoderNet:
    if M < 1 or N < 1:
        raise ParameterError(f"M and N must be >= 1, got M={M}, N={N}")
    return DecoderNet.random((*hidden_sizes, 2 * M * N), c, rng)


def forward(net: DecoderNet) -> np.ndarray:
    return net.c * net.activations()[-1]


def loss(net: DecoderNet, model: RealLinearModel) -> float:
    residual = model.H @ forward(net) - model.y
    return float(residual @ residual) / model.size


def gradients(net: DecoderNet, model: RealLinearModel) -> list[np.ndarray]:
    """Exact gradient of `loss` w.r.t. [W_2, b_2, ...]; z0 is not a parameter."""
    if net.output_size != model.size:
        raise InputSizeError(f"network output {net.output_size} does not match model size {model.size}")
    acts = net.activations()
    residual = model.H @ (net.c * acts[-1]) - model.y
    d_out = (2.0 / model.size) * (model.H.T @ residual)
    delta = net.c * d_out * (1.0 - acts[-1] ** 2)
    grads: list[np.ndarray] = []
    for l in range(len(net.weights) - 1, -1, -1):
        grads.append(delta)
        grads.append(np.outer(delta, acts[l]))
        if l > 0:
            delta = (net.weights[l].T @ delta) * (1.0 - acts[l] ** 2)
    grads.reverse()
    return grads


def adam_update(net: DecoderNet, grads: list[np.ndarray], adam: AdamState) -> tuple[DecoderNet, AdamState]:
    """One Adam step applied in place to the network parameters."""
    params = net.parameters()
    if len(grads) != len(params):
        raise InputSizeError(f"expected {len(params)} gradient arrays, got {len(grads)}")
    adam.step += 1
    correction1 = 1.0 - adam.beta1**adam.step
    correction2 = 1.0 - adam.beta2**adam.step
    for param, grad, m, v in zip(params, grads, adam.m, adam.v):
        m *= adam.beta1
        m += (1.0 - adam.beta1) * grad
        v *= adam.beta2
        v += (1.0 - adam.beta2) * grad**2
        param -= adam.lr * (m / correction1) / (np.sqrt(v / correction2) + adam.eps)
    return net, adam


def stop_check(monitor: StopMonitor, output: np.ndarray) -> StopDecision:
    """Push `output`; once W outputs are held, stop iff their variance < ε."""
    monitor.history.append(np.array(output, dtype=float))
    monitor.count += 1
    if not monitor.active:
        return StopDecision.CONTINUE
    window = np.stack(monitor.history)
    centered = window - window.mean(axis=0)
    monitor.last_variance = float(np.sum(centered**2) / monitor.window)
    if monitor.last_variance < monitor.threshold:
        return StopDecision.STOP
    return StopDecision.CONTINUE


def run_ddip(model: RealLinearModel, config: DdipConfig, rng: np.random.Generator) -> DdipResult:
    """Fit a fresh decoder to (H, y) until the output settles or the cap is hit."""
    if config.cap < config.window:
        raise ParameterError(f"iteration cap {config.cap} is below the stopping window {config.window}")
    if model.size % 2:
        raise InputSizeError(f"stacked model size must be even, got {model.size}")
    # the decoder only sees the product MN
    net = init_net(model.size // 2, 1, config.c, rng, config.hidden_sizes)
    adam = AdamState.zeros_like(net.parameters(), config.lr, config.beta1, config.beta2, config.eps)
    monitor = StopMonitor(config.window, config.threshold)
    trace: list[LossTraceRow] = []
    truncated = True
    output = forward(net)
    for iteration in range(1, config.cap + 1):
        output = forward(net)
        decision = stop_check(monitor, output)
        trace.append(LossTraceRow(iteration, loss(net, model), monitor.last_variance))
        if decision is StopDecision.STOP:
            truncated = False
            break
        if iteration < config.cap:
            adam_update(net, gradients(net, model), adam)
    if truncated:
        logger.warning("D-DIP reached its cap of %d iterations without settling", config.cap)
    else:
        logger.debug("D-DIP stopped after %d iterations (variance %.3g)", monitor.count, monitor.last_variance)
    return DdipResult(x_init=output, iterations=monitor.count, loss_trace=trace, truncated=truncated, net=net)
