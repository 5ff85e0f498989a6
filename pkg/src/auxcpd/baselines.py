"""Comparison pipelines: unsupervised CPD features and CSP, each feeding a
ridge-regularized linear discriminant."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.linalg import eigh

from .nls import FitReport, SolverOptions, fit_cpd
from .supervised import LabeledTrialSet
from .tensor import KruskalModel, khatri_rao, pseudo_inverse

__all__ = [
    "cpd_features_train",
    "cpd_features_test",
    "CSPModel",
    "csp_fit",
    "csp_features",
    "RidgeLDA",
    "lda_fit",
    "lda_predict",
    "ovr_classify",
    "CPDPipeline",
    "CSPPipeline",
]

# variances below this are clamped before taking the log
VARIANCE_FLOOR = np.finfo(np.float64).tiny


# --------------------------------------------------------------------------
# CPD features


def cpd_features_train(t4: np.ndarray, options: SolverOptions) -> tuple[KruskalModel, np.ndarray, FitReport]:
    """Nonnegative CPD of trials stacked along the last mode.

    Returns the model, the trial-mode factor (one feature row per trial)
    and the fit report.
    """
    t4 = np.asarray(t4, dtype=np.float64)
    if t4.ndim != 4:
        raise ValueError(f"expected a 4-way tensor, got {t4.ndim} modes")
    if t4.shape[3] < 2:
        raise ValueError("need at least two trials")
    model, report = fit_cpd(t4, options)
    return model, np.array(model.factors[3]), report


def _feature_projection(model: KruskalModel) -> np.ndarray:
    a1, a2, a3 = model.factors[:3]
    return pseudo_inverse(khatri_rao(a3, a2, a1).T)


def cpd_features_test(trials: np.ndarray, model: KruskalModel, projection: np.ndarray | None = None) -> np.ndarray:
    """Project one ``I1 x I2 x I3`` trial, or a stack of them, onto the CPD space."""
    trials = np.asarray(trials, dtype=np.float64)
    single = trials.ndim == 3
    if single:
        trials = trials[None]
    if trials.shape[1:] != model.shape[:3]:
        raise ValueError(f"trial shape {trials.shape[1:]} != model shape {model.shape[:3]}")
    if projection is None:
        projection = _feature_projection(model)
    feats = trials.reshape((trials.shape[0], -1), order="F") @ projection
    return feats[0] if single else feats


# --------------------------------------------------------------------------
# CSP


@dataclass(frozen=True)
class CSPModel:
    """Spatial filters (columns) sorted by descending eigenvalue."""

    filters: np.ndarray
    eigenvalues: np.ndarray
    n_pairs: int = 1

    def __post_init__(self):
        if self.n_pairs < 1 or 2 * self.n_pairs > self.filters.shape[1]:
            raise ValueError("n_pairs must be in [1, channels / 2]")


def _mean_covariance(trials: np.ndarray) -> np.ndarray:
    covs = []
    for x in trials:
        x = x - x.mean(axis=1, keepdims=True)
        c = x @ x.T
        tr = np.trace(c)
        covs.append(c / tr if tr > 0 else c)
    return np.mean(covs, axis=0)


def csp_fit(trials_a: np.ndarray, trials_b: np.ndarray, n_pairs: int = 1) -> CSPModel:
    """Common spatial patterns from two sets of ``channels x time`` trials.

    Trace-normalized covariances are averaged per class and the generalized
    problem ``S_a w = lam (S_a + S_b) w`` is solved. A ridge of
    ``1e-8 * trace`` is added to the composite if it is near singular.
    """
    trials_a = np.asarray(trials_a, dtype=np.float64)
    trials_b = np.asarray(trials_b, dtype=np.float64)
    if len(trials_a) < 2 or len(trials_b) < 2:
        raise ValueError("need at least two trials per class")
    if trials_a.shape[1] != trials_b.shape[1]:
        raise ValueError("channel counts differ")
    sa = _mean_covariance(trials_a)
    sb = _mean_covariance(trials_b)
    return csp_from_covariances(sa, sb, n_pairs)


def csp_from_covariances(sa: np.ndarray, sb: np.ndarray, n_pairs: int = 1) -> CSPModel:
    composite = sa + sb
    w = np.linalg.eigvalsh(composite)
    if w[0] <= 1e-10 * w[-1]:
        composite = composite + 1e-8 * np.trace(composite) * np.eye(len(composite))
    vals, vecs = eigh(sa, composite)
    order = np.argsort(vals)[::-1]
    return CSPModel(vecs[:, order], vals[order], n_pairs)


def csp_features(trial: np.ndarray, model: CSPModel) -> np.ndarray:
    """Log-variance along the ``m`` first and ``m`` last filters."""
    trial = np.asarray(trial, dtype=np.float64)
    if trial.shape[0] != model.filters.shape[0]:
        raise ValueError("channel count does not match the filters")
    m = model.n_pairs
    w = np.concatenate([model.filters[:, :m], model.filters[:, -m:]], axis=1)
    z = w.T @ trial
    var = np.var(z, axis=1)
    return np.log(np.maximum(var, VARIANCE_FLOOR))


# --------------------------------------------------------------------------
# classifier


class RidgeLDA:
    """Linear discriminant with a shared covariance plus ``ridge * I``.

    Classes get equal priors, so as ``ridge`` grows the rule approaches
    nearest class mean.
    """

    def __init__(self, ridge: float = 1e-6):
        if ridge < 0:
            raise ValueError("ridge must be >= 0")
        self.ridge = ridge

    def fit(self, features, labels) -> "RidgeLDA":
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        labels = list(labels)
        if x.shape[0] != len(labels):
            raise ValueError("one label per feature row required")
        self.classes_ = sorted(set(labels))
        if x.shape[0] < len(self.classes_):
            raise ValueError("fewer samples than classes")
        y = np.array([self.classes_.index(l) for l in labels])
        self.means_ = np.array([x[y == k].mean(axis=0) for k in range(len(self.classes_))])
        centered = x - self.means_[y]
        dof = max(x.shape[0] - len(self.classes_), 1)
        cov = centered.T @ centered / dof + self.ridge * np.eye(x.shape[1])
        prec = pseudo_inverse(cov)
        self.coef_ = self.means_ @ prec
        self.intercept_ = -0.5 * np.sum(self.coef_ * self.means_, axis=1)
        return self

    def decision_function(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return x @ self.coef_.T + self.intercept_

    def predict_proba(self, features) -> np.ndarray:
        d = self.decision_function(features)
        d = d - d.max(axis=1, keepdims=True)
        e = np.exp(d)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, features) -> list:
        d = self.decision_function(features)
        return [self.classes_[i] for i in np.argmax(d, axis=1)]


def lda_fit(features, labels, ridge: float = 1e-6) -> RidgeLDA:
    return RidgeLDA(ridge).fit(features, labels)


def lda_predict(model: RidgeLDA, features) -> tuple[list, np.ndarray]:
    """Labels and discriminant scores."""
    return model.predict(features), model.decision_function(features)


def ovr_classify(trial: np.ndarray, models: Sequence[tuple[CSPModel, RidgeLDA]]) -> int:
    """Index of the one-vs-rest model with the largest in-class probability.

    Each binary classifier must have been fit with labels ``{0: rest, 1: own class}``.
    Ties go to the lowest index.
    """
    if len(models) < 2:
        raise ValueError("need at least two class models")
    scores = []
    for csp, clf in models:
        proba = clf.predict_proba(csp_features(trial, csp)[None])[0]
        scores.append(proba[clf.classes_.index(1)])
    return int(np.argmax(scores))


# --------------------------------------------------------------------------
# pipelines


class CPDPipeline:
    """Unsupervised nonnegative CPD of the stacked trials + ridge LDA."""

    def __init__(self, options: SolverOptions, ridge: float = 1e-6):
        self.options = options
        self.ridge = ridge

    def fit(self, data: LabeledTrialSet) -> "CPDPipeline":
        t4 = np.moveaxis(data.trials, 0, -1)
        self.model_, feats, self.report_ = cpd_features_train(t4, replace(self.options, nonnegative=True))
        self.projection_ = _feature_projection(self.model_)
        self.train_features_ = feats
        self.lda_ = lda_fit(feats, data.labels, self.ridge)
        return self

    def features(self, trials) -> np.ndarray:
        return cpd_features_test(trials, self.model_, self.projection_)

    def predict(self, trials) -> list:
        return self.lda_.predict(self.features(trials))

    def predict_train(self) -> list:
        return self.lda_.predict(self.train_features_)


class CSPPipeline:
    """CSP log-variance features + ridge LDA; one-vs-rest beyond two classes."""

    def __init__(self, n_pairs: int = 1, ridge: float = 1e-6):
        self.n_pairs = n_pairs
        self.ridge = ridge

    def fit(self, data: LabeledTrialSet) -> "CSPPipeline":
        trials = data.trials
        if trials.ndim != 3:
            raise ValueError("CSP needs channels x time trials")
        self.classes_ = data.classes
        labels = np.array([self.classes_.index(l) for l in data.labels])
        if len(self.classes_) == 2:
            csp = csp_fit(trials[labels == 0], trials[labels == 1], self.n_pairs)
            feats = np.array([csp_features(x, csp) for x in trials])
            self.models_ = [(csp, lda_fit(feats, labels, self.ridge))]
        else:
            self.models_ = []
            for k in range(len(self.classes_)):
                own = labels == k
                csp = csp_fit(trials[own], trials[~own], self.n_pairs)
                feats = np.array([csp_features(x, csp) for x in trials])
                self.models_.append((csp, lda_fit(feats, own.astype(int), self.ridge)))
        return self

    def features(self, trials) -> np.ndarray:
        return np.array(
            [np.concatenate([csp_features(x, csp) for csp, _ in self.models_]) for x in trials]
        )

    def predict(self, trials) -> list:
        if len(self.models_) == 1:
            csp, clf = self.models_[0]
            feats = np.array([csp_features(x, csp) for x in trials])
            return [self.classes_[i] for i in clf.predict(feats)]
        return [self.classes_[ovr_classify(x, self.models_)] for x in trials]
