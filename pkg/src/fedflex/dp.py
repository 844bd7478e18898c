"""Differential privacy for outgoing model updates: L2 clipping plus
calibrated Gaussian noise, applied on-device before anything is transmitted.

Noise scale follows the classical Gaussian mechanism,
sigma = sqrt(2 ln(1.25/delta)) * C / epsilon. That calibration is proven for
epsilon < 1; larger budgets (up to 10) are accepted but flagged, not silently
re-calibrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_EPSILON = 10.0


@dataclass
class DpConfig:
    epsilon: float = 2.0
    delta: float = 1e-5
    clip_norm: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0,1)")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.epsilon > MAX_EPSILON:
            raise ValueError(f"epsilon above supported maximum {MAX_EPSILON}")

    @property
    def outside_classical_regime(self) -> bool:
        """True when epsilon exceeds the range the closed-form calibration is
        proven for."""
        return self.epsilon > 1.0

    def to_meta(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "clip_norm": self.clip_norm,
            "enabled": self.enabled,
        }


def clip(vector: np.ndarray, clip_norm: float) -> np.ndarray:
    """Scale ``vector`` onto the L2 ball of radius ``clip_norm`` if it lies
    outside; otherwise return it unchanged."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be positive")
    norm = float(np.linalg.norm(vector))
    if norm <= clip_norm:
        return vector.copy()
    return vector * (clip_norm / norm)


def gaussian_sigma(config: DpConfig) -> float:
    """Noise standard deviation of the Gaussian mechanism for this budget."""
    return math.sqrt(2.0 * math.log(1.25 / config.delta)) * config.clip_norm / config.epsilon


def privatize(
    vector: np.ndarray, config: DpConfig, rng: np.random.Generator
) -> np.ndarray:
    """Clip then add i.i.d. Normal(0, sigma^2) noise; identity when disabled.

    Deterministic for a fixed generator state; the noise draw depends only on
    the generator and the vector length, never on its values.
    """
    if not config.enabled:
        return vector.copy()
    sigma = gaussian_sigma(config)
    noise = rng.normal(0.0, sigma, size=vector.shape)
    return clip(vector, config.clip_norm) + noise
