"""BPSK over AWGN: modulation, noise and channel LLRs.

Noise is drawn from numpy's ``Generator.standard_normal`` (ziggurat method)
on a Philox-4x64 counter-based bit generator, so any (seed, stream index)
pair maps to a fixed sample sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelConfig:
    ebn0_db: float
    rate: float

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"code rate must be in (0, 1], got {self.rate}")

    @property
    def noise_variance(self) -> float:
        """Per-dimension variance at unit symbol energy: 1 / (2 R Eb/N0)."""
        return 1.0 / (2.0 * self.rate * 10.0 ** (self.ebn0_db / 10.0))

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.noise_variance))


def substream(seed: int, *index: int) -> np.random.Generator:
    """Generator for stream ``index`` under master ``seed``.

    The Philox key comes from the master seed and the counter's high words
    from ``index``, so streams never overlap and do not depend on the order
    in which they are created.
    """
    key = np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)
    if len(index) > 3:
        raise ValueError("at most three stream index components")
    idx = [int(i) for i in index] + [0] * (3 - len(index))
    counter = np.array([0, idx[2], idx[1], idx[0]], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def modulate(bits) -> np.ndarray:
    """Bit 0 -> +1.0, bit 1 -> -1.0."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def add_awgn(symbols, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.float64)
    return symbols + cfg.sigma * rng.standard_normal(symbols.shape)


def channel_llr(received, cfg: ChannelConfig | float) -> np.ndarray:
    """LLR = 2 y / sigma^2, positive favouring bit 0.

    ``cfg`` may also be the noise variance itself.
    """
    var = cfg.noise_variance if isinstance(cfg, ChannelConfig) else float(cfg)
    if not var > 0.0:
        raise ValueError("noise variance must be positive")
    return 2.0 * np.asarray(received, dtype=np.float64) / var


def hard_decision(llr) -> np.ndarray:
    return (np.asarray(llr) < 0).astype(np.uint8)
