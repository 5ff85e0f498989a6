"""From raw multichannel trials to a labeled time-frequency tensor.

Run: python demos/signal_prep.py
"""
import numpy as np

from auxcpd.signal import RawTrial, assemble, band_select, snr_db, stft_power

fs = 128.0
rng = np.random.default_rng(2)
t = np.arange(512) / fs
trials, labels = [], []
for label, hz in ((1, 10.0), (2, 22.0)):
    for _ in range(4):
        x = 0.5 * rng.standard_normal((3, t.size))
        x[label - 1] += np.sin(2 * np.pi * hz * t)
        tf = band_select(stft_power(RawTrial(x, fs), window=64, hop=32), 8, 30)
        trials.append(tf)
        labels.append(label)

data = assemble(trials, labels)
print("trials x channels x freqs x frames:", data.trials.shape)
freqs = trials[0].freqs
for label in (1, 2):
    power = data.of_class(label)[:, label - 1].mean(axis=(0, 2))
    print(f"class {label}: peak at {freqs[np.argmax(power)]:.0f} Hz on channel {label}")

clean = np.sin(2 * np.pi * 10 * t)
noise = rng.standard_normal(t.size) * 0.3
print(f"SNR of a 10 Hz tone in noise: {snr_db(clean, noise):.2f} dB")
