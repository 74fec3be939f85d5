"""Denoising-diffusion numerics over feature-map arrays.

Implements the variance schedule, the closed-form forward noising step, the
reparameterized L2 training loss against a pluggable denoiser, and ancestral
reverse sampling. Arrays are plain numpy; any shape is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidSchedule, ShapeMismatch

DEFAULT_STEPS = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02

# denoiser contract: (noisy array, step t in [1, T]) -> predicted noise, same shape
Denoiser = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray       # (T,), beta[t-1] is the step-t variance
    alpha: np.ndarray      # 1 - beta
    alpha_bar: np.ndarray  # cumulative product of alpha

    @property
    def steps(self) -> int:
        return self.beta.shape[0]


def make_schedule(T: int = DEFAULT_STEPS,
                  beta_start: float = DEFAULT_BETA_START,
                  beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    """Linear variance schedule over T steps."""
    if T < 1:
        raise InvalidSchedule(f"need T >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvalidSchedule(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(beta, alpha, alpha_bar)


def forward_noise(f0: np.ndarray, t: int, eps: np.ndarray,
                  ns: NoiseSchedule) -> np.ndarray:
    """Closed-form noisy sample at step t: sqrt(ab)*f0 + sqrt(1-ab)*eps."""
    if not 1 <= t <= ns.steps:
        raise ValueError(f"step {t} outside [1, {ns.steps}]")
    if eps.shape != f0.shape:
        raise ShapeMismatch(f"noise shape {eps.shape} != data shape {f0.shape}")
    ab = ns.alpha_bar[t - 1]
    return np.sqrt(ab) * f0 + np.sqrt(1.0 - ab) * eps


def training_loss(f0: np.ndarray, denoiser: Denoiser, ns: NoiseSchedule,
                  rng: np.random.Generator) -> float:
    """Single-draw estimate of the expected per-element L2 denoising error."""
    t = int(rng.integers(1, ns.steps + 1))
    eps = rng.standard_normal(f0.shape)
    ft = forward_noise(f0, t, eps, ns)
    pred = denoiser(ft, t)
    if pred.shape != f0.shape:
        raise ShapeMismatch("denoiser changed the array shape")
    return float(np.mean((eps - pred) ** 2))


def sample(denoiser: Denoiser, ns: NoiseSchedule, shape: tuple,
           rng: np.random.Generator, clamp: bool = True) -> np.ndarray:
    """Ancestral reverse sampling from pure noise.

    Iterates the posterior-mean update with sigma_t = sqrt(beta_t) noise; no
    noise is added at the final step. The result is clamped to [0, 1] only at
    the very end.
    """
    ft = rng.standard_normal(shape)
    for t in range(ns.steps, 0, -1):
        beta = ns.beta[t - 1]
        alpha = ns.alpha[t - 1]
        ab = ns.alpha_bar[t - 1]
        pred = denoiser(ft, t)
        mean = (ft - beta / np.sqrt(1.0 - ab) * pred) / np.sqrt(alpha)
        if t > 1:
            ft = mean + np.sqrt(beta) * rng.standard_normal(shape)
        else:
            ft = mean
    if clamp:
        ft = np.clip(ft, 0.0, 1.0)
    return ft


# ---------------------------------------------------------------------------
# shipped denoisers

def oracle_denoiser(f0: np.ndarray, ns: NoiseSchedule) -> Denoiser:
    """Exact noise predictor for a known clean target (testing only)."""

    def denoise(ft: np.ndarray, t: int) -> np.ndarray:
        ab = ns.alpha_bar[t - 1]
        return (ft - np.sqrt(ab) * f0) / np.sqrt(1.0 - ab)

    return denoise


def zero_denoiser(ft: np.ndarray, t: int) -> np.ndarray:
    return np.zeros_like(ft)


def blur_denoiser(sigma: float = 2.0) -> Denoiser:
    """Heuristic demo denoiser: treats the high-frequency residual as noise."""

    def denoise(ft: np.ndarray, t: int) -> np.ndarray:
        smoothed = gaussian_filter(ft, sigma=sigma)
        return ft - smoothed

    return denoise
