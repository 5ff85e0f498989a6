"""Synthetic two-class data: gamma-shaped mode-1 courses that mirror each
other between classes, a shared mode-2 course, per-trial jitter of the
gamma parameters and white noise at a prescribed SNR."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .supervised import LabeledTrialSet

__all__ = [
    "SynthConfig",
    "gamma_mode1",
    "mode1_for_class",
    "mode2_components",
    "mode2_course",
    "make_trial",
    "make_dataset",
]


@dataclass(frozen=True)
class SynthConfig:
    len1: int = 61
    len2: int = 201
    n_train: int = 50  # per class
    n_test: int = 50  # per class
    snr_db: float = 0.0
    param_mean: float = 2.0
    param_std: float = 0.1
    x_max: float = 12.0
    # mode-2 components: cycles per window and amplitudes, plus a constant offset
    mode2_cycles: tuple[float, ...] = (1.0, 3.0, 7.0)
    mode2_amplitudes: tuple[float, ...] = (1.0, 0.6, 0.3)
    mode2_offset: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.len1 < 2 or self.len2 < 2:
            raise ValueError("mode lengths must be >= 2")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("need at least one trial per class and split")
        if len(self.mode2_cycles) != len(self.mode2_amplitudes):
            raise ValueError("mode2_cycles and mode2_amplitudes differ in length")


def gamma_mode1(shape: float, scale: float, length: int, x_max: float = 12.0) -> np.ndarray:
    """Gamma pdf sampled at ``length`` points spanning ``[0, x_max]``."""
    if shape <= 0 or scale <= 0:
        raise ValueError("gamma shape and scale must be positive")
    x = np.linspace(0.0, x_max, length)
    return stats.gamma.pdf(x, a=shape, scale=scale)


def mode1_for_class(label: int, shape: float, scale: float, length: int, x_max: float = 12.0):
    if label not in (1, 2):
        raise ValueError("class must be 1 or 2")
    curve = gamma_mode1(shape, scale, length, x_max)
    return curve if label == 1 else curve[::-1].copy()


def mode2_components(length: int, config: SynthConfig = SynthConfig()) -> np.ndarray:
    """The three sinusoidal pieces of the mode-2 course, one per row."""
    if length < 2:
        raise ValueError("length must be >= 2")
    x = np.linspace(0.0, 1.0, length)
    return np.array(
        [a * np.sin(2 * np.pi * c * x) for c, a in zip(config.mode2_cycles, config.mode2_amplitudes)]
    )


def mode2_course(length: int, config: SynthConfig = SynthConfig()) -> np.ndarray:
    return mode2_components(length, config).sum(axis=0) + config.mode2_offset


def _draw_param(rng: np.random.Generator, mean: float, std: float) -> float:
    while True:
        v = rng.normal(mean, std)
        if v > 0:
            return v


def make_trial(label: int, config: SynthConfig, rng: np.random.Generator, with_parts: bool = False):
    """One noisy ``len1 x len2`` trial matrix.

    With ``with_parts=True`` the pair ``(clean, noise)`` is returned instead.
    """
    k = _draw_param(rng, config.param_mean, config.param_std)
    theta = _draw_param(rng, config.param_mean, config.param_std)
    clean = np.outer(
        mode1_for_class(label, k, theta, config.len1, config.x_max),
        mode2_course(config.len2, config),
    )
    # solve the SNR definition for the per-entry noise variance
    noise_energy = np.sum(clean**2) * 10.0 ** (-config.snr_db / 5.0)
    sigma = np.sqrt(noise_energy / clean.size)
    noise = rng.normal(0.0, sigma, size=clean.shape)
    if with_parts:
        return clean, noise
    return clean + noise


def _split(config: SynthConfig, seq: np.random.SeedSequence, per_class: int) -> LabeledTrialSet:
    trials, labels = [], []
    children = seq.spawn(2 * per_class)
    for i, child in enumerate(children):
        label = 1 + i // per_class
        m = make_trial(label, config, np.random.default_rng(child))
        trials.append(m[None, :, :])
        labels.append(label)
    return LabeledTrialSet(trials, labels)


def make_dataset(config: SynthConfig) -> tuple[LabeledTrialSet, LabeledTrialSet]:
    """Train and test sets of ``1 x len1 x len2`` trials (a singleton channel mode)."""
    train_seq, test_seq = np.random.SeedSequence(config.seed).spawn(2)
    return _split(config, train_seq, config.n_train), _split(config, test_seq, config.n_test)
