"""Supervised CPD against the unsupervised CPD + LDA pipeline on synthetic data.

A reduced version of the accuracy-versus-SNR experiment: two SNR points,
three initializations each. Pass --full for the default sizes and ten runs.

Run: python demos/supervised_synthetic.py [--full]
"""
import sys

from auxcpd.harness import ExperimentConfig, run_snr_sweep
from auxcpd.supervised import parameter_count
from auxcpd.synth import SynthConfig

full = "--full" in sys.argv
synth = SynthConfig() if full else SynthConfig(n_train=20, n_test=20)
cfg = ExperimentConfig(synth=synth, snr_grid=(-16.8, 0.0), repeats=10 if full else 3)

for snr, table in run_snr_sweep(cfg):
    accs = ", ".join(f"{a:.0f}" for a in table.accuracies)
    print(f"{snr:6.1f} dB  {table.method:<11} mean {table.mean:6.2f}  std {table.std:5.2f}  runs [{accs}]")

# free parameters: the class factor is fixed, so only per-class trial loadings are fitted
print("parameters (proposed, plain CPD):", parameter_count((1, synth.len1, synth.len2, synth.n_train), 2, 2))
