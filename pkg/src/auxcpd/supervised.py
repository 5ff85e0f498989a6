"""CPD with the class mode held fixed: training and projection-based classification.

Trials of shape ``channel x frequency x time`` are arranged into a
fifth-order tensor ``channel x frequency x time x trial x class`` whose class
factor is the identity. With ``R = C`` every rank-one term is tied to one
class, and a new trial is scored by projecting it onto the span of the
learned ``channel x frequency x time`` patterns.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .nls import FitReport, SolverOptions, fit_cpd
from .tensor import KruskalModel, khatri_rao, pseudo_inverse, vec

log = logging.getLogger(__name__)

__all__ = [
    "LabeledTrialSet",
    "SupervisedModel",
    "Prediction",
    "fold_training_tensor",
    "projection_matrix",
    "train",
    "classify",
    "classify_many",
    "accuracy",
    "parameter_count",
]


class LabeledTrialSet:
    """Equally shaped trials with one class label each.

    ``trials`` can be a sequence of arrays or one array with the trial index
    first. Labels may be any sortable values; classes are ordered by sorting.
    """

    def __init__(self, trials, labels: Sequence):
        trials = np.asarray(trials, dtype=np.float64)
        if trials.ndim < 2:
            raise ValueError("trials must be a stack of arrays")
        labels = list(labels)
        if len(labels) != trials.shape[0]:
            raise ValueError(f"{trials.shape[0]} trials but {len(labels)} labels")
        if len(labels) == 0:
            raise ValueError("empty trial set")
        trials.setflags(write=False)
        self.trials = trials
        self.labels = labels

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def trial_shape(self) -> tuple[int, ...]:
        return self.trials.shape[1:]

    @property
    def classes(self) -> list:
        return sorted(set(self.labels))

    def counts(self) -> dict:
        return {c: self.labels.count(c) for c in self.classes}

    def subset(self, index) -> "LabeledTrialSet":
        index = list(index)
        return LabeledTrialSet(self.trials[index], [self.labels[i] for i in index])

    def of_class(self, c) -> np.ndarray:
        return self.trials[[i for i, l in enumerate(self.labels) if l == c]]


@dataclass(frozen=True)
class Prediction:
    label: object
    scores: np.ndarray


@dataclass(frozen=True, eq=False)
class SupervisedModel:
    """Learned factors of the class-folded decomposition.

    ``factors`` are the channel, frequency, time and trial factors, then the
    identity class factor. ``projection`` maps a column-major vectorized
    trial to one score per class.
    """

    factors: tuple[np.ndarray, ...]
    classes: tuple
    projection: np.ndarray
    report: FitReport | None = None

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def trial_shape(self) -> tuple[int, int, int]:
        return tuple(f.shape[0] for f in self.factors[:3])

    @property
    def kruskal(self) -> KruskalModel:
        return KruskalModel(self.factors)


def fold_training_tensor(
    data: LabeledTrialSet, subsample: bool = True, seed: int = 0
) -> tuple[np.ndarray, list]:
    """Stack trials into ``I1 x I2 x I3 x I4 x C``.

    Slab ``[..., j, c]`` is the ``j``-th trial of class ``c`` (classes in
    sorted order). Classes with more trials than the smallest one are
    subsampled with a seeded generator, keeping the original trial order;
    ``subsample=False`` makes unequal counts an error instead.

    Returns the tensor and the class list.
    """
    if len(data.trial_shape) != 3:
        raise ValueError(f"trials must be 3-way, got shape {data.trial_shape}")
    classes = data.classes
    counts = data.counts()
    n_per = min(counts.values())
    if len(set(counts.values())) > 1 and not subsample:
        raise ValueError(f"unequal trials per class {counts}; enable subsampling")
    rng = np.random.default_rng(seed)
    out = np.empty(data.trial_shape + (n_per, len(classes)), order="F")
    for ci, c in enumerate(classes):
        block = data.of_class(c)
        if block.shape[0] > n_per:
            keep = np.sort(rng.choice(block.shape[0], size=n_per, replace=False))
            block = block[keep]
        out[..., ci] = np.moveaxis(block, 0, -1)
    return out, classes


def projection_matrix(factors: Sequence[np.ndarray]) -> np.ndarray:
    """``pinv((A3 ⊙ A2 ⊙ A1).T)``, shape ``(I1 I2 I3, R)``."""
    a1, a2, a3 = factors[:3]
    return pseudo_inverse(khatri_rao(a3, a2, a1).T)


def train(
    data: LabeledTrialSet,
    options: SolverOptions = SolverOptions(),
    subsample: bool = True,
) -> SupervisedModel:
    """Fit the class-folded nonnegative CPD and cache the projection matrix.

    The rank is forced to the number of classes and the constraint is
    always on; ``options`` supplies everything else. Subsampling of
    unbalanced classes uses ``options.seed``.
    """
    n_classes = len(data.classes)
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if options.rank != n_classes or not options.nonnegative:
        if options.rank != n_classes:
            log.warning("rank %d replaced by the class count %d", options.rank, n_classes)
        options = replace(options, rank=n_classes, nonnegative=True)
    t, classes = fold_training_tensor(data, subsample=subsample, seed=options.seed)
    identity = np.eye(n_classes)
    model, report = fit_cpd(t, options, fixed={4: identity})
    if report.history and report.history[-1] >= report.history[0]:
        log.warning("training did not improve on the initialization")
    factors = model.factors
    return SupervisedModel(
        factors=factors,
        classes=tuple(classes),
        projection=_readonly(projection_matrix(factors)),
        report=report,
    )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _scores(trials: np.ndarray, model: SupervisedModel) -> np.ndarray:
    n = trials.shape[0]
    flat = trials.reshape((n, -1), order="F")
    return flat @ model.projection


def classify(trial: np.ndarray, model: SupervisedModel) -> Prediction:
    """Score a single ``I1 x I2 x I3`` trial; the label is the first maximal score."""
    trial = np.asarray(trial, dtype=np.float64)
    if trial.shape != model.trial_shape:
        raise ValueError(f"trial shape {trial.shape} != model trial shape {model.trial_shape}")
    scores = vec(trial) @ model.projection
    return Prediction(model.classes[int(np.argmax(scores))], scores)


def classify_many(trials: np.ndarray, model: SupervisedModel) -> tuple[list, np.ndarray]:
    """Vectorized :func:`classify` over a stack of trials."""
    trials = np.asarray(trials, dtype=np.float64)
    if trials.shape[1:] != model.trial_shape:
        raise ValueError(f"trial shape {trials.shape[1:]} != model trial shape {model.trial_shape}")
    scores = _scores(trials, model)
    return [model.classes[i] for i in np.argmax(scores, axis=1)], scores


def accuracy(predicted: Sequence, truth: Sequence) -> float:
    """Percentage of matching labels."""
    if len(predicted) != len(truth):
        raise ValueError("length mismatch")
    return 100.0 * float(np.mean([p == t for p, t in zip(predicted, truth)]))


def parameter_count(shape: Sequence[int], n_classes: int, rank: int) -> tuple[int, int]:
    """Free parameters of the proposed model and of a plain CPD of the stacked trials.

    ``shape`` is ``(I1, I2, I3, I4)`` with ``I4`` the trials per class. The
    fixed class factor contributes nothing, so the proposed count is
    ``(I1 + I2 + I3 + I4) R``; stacking all ``n_classes`` trial blocks
    gives ``(I1 + I2 + I3 + n_classes I4) R`` for the plain CPD.
    """
    i1, i2, i3, i4 = (int(s) for s in shape)
    if min(i1, i2, i3, i4) < 1 or n_classes < 1 or rank < 0:
        raise ValueError("dimensions must be positive")
    return (i1 + i2 + i3 + i4) * rank, (i1 + i2 + i3 + n_classes * i4) * rank
