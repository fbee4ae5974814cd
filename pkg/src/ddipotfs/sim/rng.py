"""Seeded random streams for Monte Carlo frames.

Frame ``f`` of a run with root seed ``s`` always draws from
``SeedSequence(s, spawn_key=(f,))``, independent of how many frames, SNR
points or worker threads the run uses. Inside a frame each consumer (bits,
channel, noise, D-DIP weights) gets its own child stream, so enabling or
disabling a detector never shifts the channel or noise realization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FrameStreams", "frame_rng", "frame_streams"]


@dataclass(frozen=True)
class FrameStreams:
    bits: np.random.Generator
    channel: np.random.Generator
    noise: np.random.Generator
    ddip: np.random.Generator


def frame_rng(seed: int, frame: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(frame,)))


def frame_streams(rng: np.random.Generator) -> FrameStreams:
    """Split a frame generator into its four consumer streams."""
    bits, channel, noise, ddip = (np.random.default_rng(child) for child in rng.bit_generator.seed_seq.spawn(4))
    return FrameStreams(bits=bits, channel=channel, noise=noise, ddip=ddip)
