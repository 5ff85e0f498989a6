"""CSP filters with a ridge LDA on raw two-class trials.

Run: python demos/baselines_csp.py
"""
import numpy as np

from auxcpd.baselines import CSPPipeline, csp_fit
from auxcpd.supervised import LabeledTrialSet, accuracy

rng = np.random.default_rng(3)


def draw(n):
    trials, labels = [], []
    for label in (1, 2):
        gain = np.ones(6)
        gain[0 if label == 1 else 5] = 2.5
        for _ in range(n):
            trials.append(gain[:, None] * rng.standard_normal((6, 250)))
            labels.append(label)
    return LabeledTrialSet(np.array(trials), labels)


tr, te = draw(30), draw(30)
model = csp_fit(tr.of_class(1), tr.of_class(2), n_pairs=1)
print("generalized eigenvalues:", np.round(model.eigenvalues, 3))
print("first and last filters peak on channels", np.argmax(np.abs(model.filters[:, 0])), np.argmax(np.abs(model.filters[:, -1])))
pipe = CSPPipeline(n_pairs=1).fit(tr)
print(f"test accuracy {accuracy(pipe.predict(te.trials), te.labels):.1f}%")
