"""Experiment runner: SNR sweeps, repeated-initialization tables, rank sweeps."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import CPDPipeline, CSPPipeline
from .nls import SolverOptions
from .signal import RawTrial, TFTrial, band_select, stft_power
from .supervised import LabeledTrialSet, accuracy, classify_many, train
from .synth import SynthConfig, make_dataset

log = logging.getLogger(__name__)

METHODS = ("supervised", "cpd+lda", "csp+lda")
DEFAULT_SNR_GRID = (-20.0, -17.0, -16.8, -14.0, -11.0, -8.0, -5.0, -2.0, 1.0, 4.0)

__all__ = [
    "METHODS",
    "DEFAULT_SNR_GRID",
    "ExperimentConfig",
    "RunResult",
    "ResultTable",
    "derive_seeds",
    "fit_and_score",
    "run_repeated",
    "run_snr_sweep",
    "rank_sweep",
    "stratified_holdout",
    "load_dataset",
    "write_sweep_csv",
    "write_runs_csv",
    "write_table_csv",
    "read_table_csv",
]


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[str, ...] = ("supervised", "cpd+lda")
    synth: SynthConfig = SynthConfig()
    snr_grid: tuple[float, ...] = DEFAULT_SNR_GRID
    # "classes" (R = C), an integer, or "sweep" (held-out selection); baselines only
    rank: str | int = "classes"
    repeats: int = 10
    seed: int = 0
    tol: float = 1e-12
    max_iter: int = 500
    ridge: float = 1e-6
    csp_pairs: int = 1
    holdout: float = 1 / 3
    workers: int = 1
    # trust-region settings forwarded to every fit
    radius0: float = 1.0
    eta: float = 1e-3
    shrink: float = 0.25
    grow: float = 2.0
    max_radius: float = 1e6
    inner_steps: int = 1
    max_rejections: int = 30

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}; choose from {METHODS}")
        if not (self.rank in ("classes", "sweep") or (isinstance(self.rank, int) and self.rank >= 1)):
            raise ValueError(f"bad rank policy {self.rank!r}")

    def solver(self, rank: int, seed: int) -> SolverOptions:
        return SolverOptions(
            rank=rank,
            max_iter=self.max_iter,
            tol=self.tol,
            seed=seed,
            radius0=self.radius0,
            eta=self.eta,
            shrink=self.shrink,
            grow=self.grow,
            max_radius=self.max_radius,
            inner_steps=self.inner_steps,
            max_rejections=self.max_rejections,
        )


@dataclass
class RunResult:
    method: str
    run: int
    seed: int
    train_acc: float
    test_acc: float
    iterations: int = 0
    reason: str = ""
    rank: int = 0


@dataclass
class ResultTable:
    method: str
    runs: list[RunResult] = field(default_factory=list)
    condition: str = ""

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.test_acc for r in self.runs])

    @property
    def mean(self) -> float:
        return _mean(self.accuracies)

    @property
    def std(self) -> float:
        return _std(self.accuracies)


def _mean(values) -> float:
    return float(np.mean(np.asarray(values, dtype=np.float64)))


def _std(values) -> float:
    # sample standard deviation, the convention of the reported tables
    values = np.asarray(values, dtype=np.float64)
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def derive_seeds(master: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master).spawn(n)]


# --------------------------------------------------------------------------
# one run


def _n_classes(data: LabeledTrialSet) -> int:
    return len(data.classes)


def stratified_holdout(data: LabeledTrialSet, fraction: float, seed: int) -> tuple[LabeledTrialSet, LabeledTrialSet]:
    """Split off ``fraction`` of every class (at least one trial each side)."""
    rng = np.random.default_rng(seed)
    fit_idx, hold_idx = [], []
    for c in data.classes:
        idx = [i for i, l in enumerate(data.labels) if l == c]
        if len(idx) < 2:
            raise ValueError(f"class {c!r} has fewer than two trials; cannot hold out")
        idx = list(rng.permutation(idx))
        k = min(max(int(round(fraction * len(idx))), 1), len(idx) - 1)
        hold_idx += idx[:k]
        fit_idx += idx[k:]
    return data.subset(sorted(fit_idx)), data.subset(sorted(hold_idx))


def rank_sweep(
    train_set: LabeledTrialSet,
    holdout: LabeledTrialSet,
    config: ExperimentConfig,
    seed: int = 0,
) -> tuple[int, list[tuple[int, float]]]:
    """Try ranks ``C, C-1, ..., 1`` for the CPD baseline; ties keep the larger rank."""
    rows = []
    best, best_acc = None, -1.0
    for r in range(_n_classes(train_set), 0, -1):
        pipe = CPDPipeline(config.solver(r, seed), config.ridge).fit(train_set)
        acc = accuracy(pipe.predict(holdout.trials), holdout.labels)
        rows.append((r, acc))
        if acc > best_acc:
            best, best_acc = r, acc
    return best, rows


def fit_and_score(
    method: str,
    train_set: LabeledTrialSet,
    test_set: LabeledTrialSet,
    config: ExperimentConfig,
    seed: int,
    run: int = 0,
) -> RunResult:
    """Train ``method`` with solver seed ``seed`` and score both splits."""
    n_classes = _n_classes(train_set)
    if method == "supervised":
        model = train(train_set, config.solver(n_classes, seed))
        tr = accuracy(classify_many(train_set.trials, model)[0], train_set.labels)
        te = accuracy(classify_many(test_set.trials, model)[0], test_set.labels)
        rep = model.report
        return RunResult(method, run, seed, tr, te, rep.iterations, rep.reason, n_classes)
    if method == "cpd+lda":
        if config.rank == "classes":
            rank = n_classes
        elif config.rank == "sweep":
            fit_part, hold = stratified_holdout(train_set, config.holdout, seed)
            rank, _ = rank_sweep(fit_part, hold, config, seed)
        else:
            rank = int(config.rank)
        pipe = CPDPipeline(config.solver(rank, seed), config.ridge).fit(train_set)
        tr = accuracy(pipe.predict_train(), train_set.labels)
        te = accuracy(pipe.predict(test_set.trials), test_set.labels)
        return RunResult(method, run, seed, tr, te, pipe.report_.iterations, pipe.report_.reason, rank)
    if method == "csp+lda":
        pipe = CSPPipeline(config.csp_pairs, config.ridge).fit(train_set)
        tr = accuracy(pipe.predict(train_set.trials), train_set.labels)
        te = accuracy(pipe.predict(test_set.trials), test_set.labels)
        return RunResult(method, run, seed, tr, te, 0, "closed-form", 0)
    raise ValueError(f"unknown method {method!r}")


def _task(args):
    return fit_and_score(*args)


def _map(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks))


# --------------------------------------------------------------------------
# experiments


def run_repeated(
    train_set: LabeledTrialSet,
    test_set: LabeledTrialSet,
    config: ExperimentConfig,
    condition: str = "",
) -> list[ResultTable]:
    """``config.repeats`` runs per method with seeds derived from ``config.seed``.

    The data split is fixed; only the initialization changes between runs.
    CSP has no initialization and is run once.
    """
    seeds = derive_seeds(config.seed, config.repeats)
    tasks = []
    for method in config.methods:
        n = 1 if method == "csp+lda" else config.repeats
        tasks += [(method, train_set, test_set, config, seeds[i], i + 1) for i in range(n)]
    results = _map(tasks, config.workers)
    tables = []
    for method in config.methods:
        tables.append(ResultTable(method, [r for r in results if r.method == method], condition))
    return tables


def run_snr_sweep(config: ExperimentConfig) -> list[tuple[float, ResultTable]]:
    """Synthetic-data accuracy versus SNR.

    Every grid point gets its own dataset (seeded from ``config.seed`` and
    the point's position); within a point the runs differ only by
    initialization. Output is ordered by grid point, then method.
    """
    data_seeds = derive_seeds(config.seed + 1, len(config.snr_grid))
    run_seeds = derive_seeds(config.seed, config.repeats)
    tasks, keys = [], []
    for snr, dseed in zip(config.snr_grid, data_seeds):
        train_set, test_set = make_dataset(replace(config.synth, snr_db=float(snr), seed=dseed))
        for method in config.methods:
            for i in range(config.repeats):
                tasks.append((method, train_set, test_set, config, run_seeds[i], i + 1))
                keys.append(float(snr))
    results = _map(tasks, config.workers)
    out = []
    for snr in config.snr_grid:
        for method in config.methods:
            runs = [r for r, k in zip(results, keys) if k == float(snr) and r.method == method]
            out.append((float(snr), ResultTable(method, runs, f"snr={snr:g}")))
    return out


# --------------------------------------------------------------------------
# data files


def load_dataset(
    path,
    band: tuple[float, float] | None = None,
    window: int | None = None,
    hop: int | None = None,
    raw_for_csp: bool = False,
) -> tuple[LabeledTrialSet, LabeledTrialSet | None]:
    """Read a labeled tensor file and return (train, test).

    The last axis indexes trials. Without a ``split`` entry every trial is
    training data and ``test`` is None. ``"kind": "raw"`` files hold
    ``channels x time`` trials plus ``sampling_rate``; they are turned into
    power tensors unless ``raw_for_csp`` is set. Power-tensor files may
    carry ``axes.freqs`` (Hz per bin) to enable ``band``.
    """
    from .io import read_tensor

    t, header = read_tensor(path)
    if "labels" not in header:
        raise ValueError(f"{path}: no labels in header")
    labels = header["labels"]
    trials = np.moveaxis(t, -1, 0)
    kind = header.get("kind", "tf")
    if kind == "raw" and not raw_for_csp:
        fs = float(header["sampling_rate"])
        tfs = [stft_power(RawTrial(x, fs), window, hop) for x in trials]
        if band is not None:
            tfs = [band_select(tf, *band) for tf in tfs]
        trials = np.stack([tf.power for tf in tfs])
    elif kind == "raw":
        if trials.ndim != 3:
            raise ValueError("raw trials must be channels x time")
    else:
        if raw_for_csp:
            raise ValueError("CSP needs a raw (channels x time) dataset")
        if band is not None:
            freqs = header.get("axes", {}).get("freqs")
            if freqs is None:
                raise ValueError("band selection needs axes.freqs in the file header")
            tf = [band_select(TFTrial(x, freqs, np.arange(x.shape[2])), *band) for x in trials]
            trials = np.stack([x.power for x in tf])
        if trials.ndim == 3:
            trials = trials[:, None]
    split = header.get("split")
    if split is None:
        return LabeledTrialSet(trials, labels), None
    tr = [i for i, s in enumerate(split) if s == "train"]
    te = [i for i, s in enumerate(split) if s == "test"]
    full = LabeledTrialSet(trials, labels)
    return full.subset(tr), (full.subset(te) if te else None)


# --------------------------------------------------------------------------
# CSV output


_RUN_FIELDS = ["method", "run", "seed", "rank", "train_acc", "test_acc", "iterations", "reason"]


def write_sweep_csv(path, sweep: Sequence[tuple[float, ResultTable]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snr_db"] + _RUN_FIELDS)
        for snr, table in sweep:
            for r in table.runs:
                w.writerow([repr(snr)] + [_fmt(getattr(r, f)) for f in _RUN_FIELDS])


def write_runs_csv(path, tables: Sequence[ResultTable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition"] + _RUN_FIELDS)
        for t in tables:
            for r in t.runs:
                w.writerow([t.condition] + [_fmt(getattr(r, f)) for f in _RUN_FIELDS])


def write_table_csv(path, tables: Sequence[ResultTable]) -> None:
    """One row per method: per-run test accuracies, then mean and std."""
    n = max(len(t.runs) for t in tables)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "method"] + [f"run_{i + 1}" for i in range(n)] + ["mean", "std"])
        for t in tables:
            accs = [repr(float(a)) for a in t.accuracies]
            accs += [""] * (n - len(accs))
            w.writerow([t.condition, t.method] + accs + [repr(t.mean), repr(t.std)])


def read_table_csv(path) -> list[dict]:
    """Parse :func:`write_table_csv` output back into runs, mean and std."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            runs = [float(v) for k, v in row.items() if k.startswith("run_") and v != ""]
            rows.append(
                {
                    "condition": row["condition"],
                    "method": row["method"],
                    "runs": runs,
                    "mean": float(row["mean"]),
                    "std": float(row["std"]),
                }
            )
    return rows


def summarize(values) -> tuple[float, float]:
    """Mean and sample standard deviation, as written to the tables."""
    return _mean(values), _std(values)


def _fmt(v):
    return repr(v) if isinstance(v, float) else v
