"""Supervised canonical polyadic decomposition with a fixed class-mode factor,
plus unsupervised-CPD and CSP baselines and a synthetic benchmark."""
from .nls import FitReport, SolverOptions, fit_cpd
from .supervised import (
    LabeledTrialSet,
    Prediction,
    SupervisedModel,
    classify,
    classify_many,
    parameter_count,
    train,
)
from .tensor import KruskalModel, khatri_rao, reconstruct, unfold, fold

__version__ = "0.1.0"
