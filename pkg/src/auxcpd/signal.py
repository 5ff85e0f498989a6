"""Time-frequency power tensors and the SNR measure used for synthetic data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["RawTrial", "TFTrial", "stft_power", "band_select", "assemble", "snr_db"]


@dataclass(frozen=True)
class RawTrial:
    """Multichannel recording, ``samples`` is channels x time."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if not self.fs > 0:
            raise ValueError("sampling rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or inf")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class TFTrial:
    """Power tensor (channel x frequency x frame) with its axes."""

    power: np.ndarray
    freqs: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        power = np.asarray(self.power, dtype=np.float64)
        if power.ndim != 3:
            raise ValueError("power must be channel x frequency x frame")
        if power.shape[1:] != (len(self.freqs), len(self.times)):
            raise ValueError("axis lengths do not match the power tensor")
        if np.any(power < 0):
            raise ValueError("power must be nonnegative")
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=np.float64))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))


def stft_power(trial: RawTrial, window: int | None = None, hop: int | None = None) -> TFTrial:
    """Hann-windowed short-time power spectrum of every channel.

    ``window`` defaults to one second of samples and ``hop`` to a quarter
    window. Power is one-sided and scaled so that summing a frame over
    frequency gives the energy of the windowed frame.
    """
    x = trial.samples
    n_samples = x.shape[1]
    window = int(round(trial.fs)) if window is None else int(window)
    hop = max(window // 4, 1) if hop is None else int(hop)
    if window < 1 or hop < 1:
        raise ValueError("window and hop must be >= 1")
    if window > n_samples:
        raise ValueError(f"trial of {n_samples} samples is shorter than one window ({window})")
    n_frames = (n_samples - window) // hop + 1
    taper = np.hanning(window + 2)[1:-1] if window > 1 else np.ones(1)
    starts = np.arange(n_frames) * hop
    idx = starts[:, None] + np.arange(window)[None, :]
    frames = x[:, idx] * taper  # channel x frame x sample
    spec = np.fft.rfft(frames, axis=-1)
    power = np.abs(spec) ** 2 / window
    # fold the negative frequencies onto the positive bins
    power[..., 1 : (window + 1) // 2] *= 2.0
    freqs = np.fft.rfftfreq(window, d=1.0 / trial.fs)
    times = (starts + window / 2.0) / trial.fs
    return TFTrial(np.transpose(power, (0, 2, 1)), freqs, times)


def band_select(tf: TFTrial, lo: float, hi: float) -> TFTrial:
    """Keep the frequency bins with ``lo <= f <= hi``."""
    if lo > hi:
        raise ValueError(f"empty band [{lo}, {hi}]")
    keep = (tf.freqs >= lo) & (tf.freqs <= hi)
    if not np.any(keep):
        raise ValueError(f"no frequency bins in [{lo}, {hi}] Hz")
    return TFTrial(tf.power[:, keep, :], tf.freqs[keep], tf.times)


def assemble(trials: Sequence[TFTrial], labels: Sequence):
    """Package power tensors and labels into a LabeledTrialSet."""
    from .supervised import LabeledTrialSet

    if len(trials) != len(labels):
        raise ValueError("need one label per trial")
    shapes = {t.power.shape for t in trials}
    if len(shapes) > 1:
        raise ValueError(f"trials have differing shapes: {sorted(shapes)}")
    return LabeledTrialSet([t.power for t in trials], list(labels))


def snr_db(signal: np.ndarray, noise: np.ndarray) -> float:
    """``10 log10 sqrt(sum signal^2 / sum noise^2)``.

    Note the square root: one unit here is half a conventional
    (energy-ratio) decibel.
    """
    signal = np.asarray(signal, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if signal.shape != noise.shape:
        raise ValueError(f"shape mismatch {signal.shape} vs {noise.shape}")
    en = float(np.sum(noise**2))
    if en == 0.0:
        raise ValueError("noise tensor is identically zero")
    return float(10.0 * np.log10(np.sqrt(float(np.sum(signal**2)) / en)))
