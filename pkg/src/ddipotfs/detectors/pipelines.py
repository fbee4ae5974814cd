"""The three detectors compared by the simulator, behind one `detect` interface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddipotfs.detectors.bpic import BpicResult, RealAlphabet, mmse_denoise, run_bpic
from ddipotfs.detectors.ddip import DdipConfig, DdipResult, run_ddip
from ddipotfs.link.channel import RealLinearModel


@dataclass(frozen=True)
class Detection:
    x_hat: np.ndarray
    bpic: BpicResult | None = None
    ddip: DdipResult | None = None

    @property
    def ddip_iterations(self) -> int | None:
        return None if self.ddip is None else self.ddip.iterations


class MmseDetector:
    name = "mmse"

    def __init__(self, *, alphabet: RealAlphabet, T: int = 10, ddip_config: DdipConfig | None = None):
        self.alphabet = alphabet

    def detect(self, model: RealLinearModel, rng: np.random.Generator) -> Detection:
        return Detection(x_hat=mmse_denoise(model))


class MmseBpicDetector(MmseDetector):
    """BPIC seeded with the MMSE estimate."""

    name = "mmse-bpic"

    def __init__(self, *, alphabet: RealAlphabet, T: int = 10, ddip_config: DdipConfig | None = None):
        super().__init__(alphabet=alphabet)
        self.T = T

    def detect(self, model: RealLinearModel, rng: np.random.Generator) -> Detection:
        result = run_bpic(model, mmse_denoise(model), self.T, self.alphabet)
        return Detection(x_hat=result.x_hat, bpic=result)


class DdipBpicDetector(MmseBpicDetector):
    """BPIC seeded with the D-DIP output; `rng` draws the decoder's initial weights."""

    name = "ddip-bpic"

    def __init__(self, *, alphabet: RealAlphabet, T: int = 10, ddip_config: DdipConfig | None = None):
        super().__init__(alphabet=alphabet, T=T)
        self.ddip_config = ddip_config or DdipConfig()

    def detect(self, model: RealLinearModel, rng: np.random.Generator) -> Detection:
        ddip = run_ddip(model, self.ddip_config, rng)
        result = run_bpic(model, ddip.x_init, self.T, self.alphabet)
        return Detection(x_hat=result.x_hat, bpic=result, ddip=ddip)
