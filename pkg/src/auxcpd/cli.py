"""Command-line front end.

Subcommands: gen-data, synth-sweep, train, classify, rank-sweep,
export-features, evaluate. Options may also come from a ``--config`` file of
``key = value`` lines (``#`` starts a comment, keys are the long option
names with or without leading dashes, ``-`` and ``_`` interchangeable);
command-line flags take precedence over the file.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .harness import ExperimentConfig
from .io import TensorFileError, load_model, save_model, write_tensor
from .synth import SynthConfig, make_dataset
from .supervised import accuracy, classify_many, train

log = logging.getLogger("auxcpd")


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines into a dict keyed by argparse dest names."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


def _band(text: str) -> tuple[float, float] | None:
    if text in (None, "", "all", "full"):
        return None
    lo, hi = _float_list(text.replace(":", ",").replace("-", ",", 1) if "," not in text else text)
    return lo, hi


def _rank(text):
    text = str(text)
    return text if text in ("classes", "sweep") else int(text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).lower() in ("1", "true", "yes", "on")


def _methods(text) -> tuple[str, ...]:
    return tuple(m.strip() for m in str(text).split(",") if m.strip())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value option file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    g = p.add_argument_group("solver")
    g.add_argument("--radius0", type=float, default=1.0)
    g.add_argument("--eta", type=float, default=1e-3)
    g.add_argument("--shrink", type=float, default=0.25)
    g.add_argument("--grow", type=float, default=2.0)
    g.add_argument("--max-radius", type=float, default=1e6)
    g.add_argument("--inner-steps", type=int, default=1)
    g.add_argument("--max-rejections", type=int, default=30)
    g = p.add_argument_group("baselines")
    g.add_argument("--ridge", type=float, default=1e-6)
    g.add_argument("--csp-pairs", type=int, default=1)
    g.add_argument("--holdout", type=float, default=1 / 3, help="held-out fraction for rank sweeps")


def _synth_opts(p: argparse.ArgumentParser) -> None:
    d = SynthConfig()
    g = p.add_argument_group("synthetic data")
    g.add_argument("--trials", type=int, default=d.n_train, help="trials per class and split")
    g.add_argument("--len1", type=int, default=d.len1)
    g.add_argument("--len2", type=int, default=d.len2)
    g.add_argument("--param-mean", type=float, default=d.param_mean)
    g.add_argument("--param-std", type=float, default=d.param_std)
    g.add_argument("--x-max", type=float, default=d.x_max)


def _synth_config(args, **extra) -> SynthConfig:
    return SynthConfig(
        len1=args.len1,
        len2=args.len2,
        n_train=args.trials,
        n_test=args.trials,
        param_mean=args.param_mean,
        param_std=args.param_std,
        x_max=args.x_max,
        **extra,
    )


def _data_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="labeled tensor file")
    p.add_argument("--band", type=_band, default=None, help="lo,hi in Hz (inclusive)")
    p.add_argument("--window", type=int, default=None, help="STFT window (samples) for raw data")
    p.add_argument("--hop", type=int, default=None, help="STFT hop (samples) for raw data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auxcpd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset as a tensor file")
    _common(p)
    p.add_argument("--snr", type=float, default=0.0)
    _synth_opts(p)

    p = sub.add_parser("synth-sweep", help="accuracy versus SNR on synthetic data")
    _common(p)
    p.add_argument("--snr-grid", type=_float_list, default=harness.DEFAULT_SNR_GRID)
    p.add_argument("--method", type=_methods, default=("supervised", "cpd+lda"))
    p.add_argument("--rank", type=_rank, default="classes")
    p.add_argument("--repeats", type=int, default=10)
    _synth_opts(p)

    p = sub.add_parser("train", help="train the supervised model on a tensor file")
    _common(p)
    _data_opts(p)
    p.add_argument("--dump-factors", type=_bool, nargs="?", const=True, default=False)

    p = sub.add_parser("classify", help="classify trials with a saved model")
    _common(p)
    _data_opts(p)
    p.add_argument("--model", required=True)

    p = sub.add_parser("rank-sweep", help="choose the CPD-baseline rank on held-out data")
    _common(p)
    _data_opts(p)

    p = sub.add_parser("export-features", help="write baseline features as CSV")
    _common(p)
    _data_opts(p)
    p.add_argument("--method", type=_methods, default=("cpd+lda",))
    p.add_argument("--rank", type=_rank, default="classes")

    p = sub.add_parser("evaluate", help="repeated-initialization accuracy table")
    _common(p)
    _data_opts(p)
    p.add_argument("--method", type=_methods, default=("supervised", "cpd+lda"))
    p.add_argument("--rank", type=_rank, default="classes")
    p.add_argument("--repeats", type=int, default=10)
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = parse_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            parser.error(f"unknown option(s) in {args.config}: {', '.join(unknown)}")
        defaults = {}
        for k, v in cfg.items():
            action = known[k]
            defaults[k] = action.type(v) if action.type else v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _experiment(args, **extra) -> ExperimentConfig:
    names = (
        "seed", "tol", "max_iter", "workers", "radius0", "eta", "shrink", "grow",
        "max_radius", "inner_steps", "max_rejections", "ridge", "csp_pairs", "holdout",
    )
    fields = {n: getattr(args, n) for n in names}
    for name in ("repeats", "rank"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    if hasattr(args, "method"):
        fields["methods"] = args.method
    fields.update(extra)
    return ExperimentConfig(**fields)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> None:
    cfg = _synth_config(args, snr_db=args.snr, seed=args.seed)
    tr, te = make_dataset(cfg)
    trials = np.concatenate([tr.trials, te.trials])
    path = _out(args) / "synthetic.tensor"
    write_tensor(
        path,
        np.moveaxis(trials, 0, -1),
        labels=tr.labels + te.labels,
        split=["train"] * len(tr) + ["test"] * len(te),
        snr_db=args.snr,
        seed=args.seed,
    )
    print(f"wrote {path} ({len(tr)} train + {len(te)} test trials)")


def cmd_synth_sweep(args) -> None:
    synth = _synth_config(args)
    cfg = _experiment(args, synth=synth, snr_grid=args.snr_grid)
    sweep = harness.run_snr_sweep(cfg)
    out = _out(args)
    harness.write_sweep_csv(out / "sweep.csv", sweep)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snr_db", "method", "mean_train_acc", "mean_test_acc", "std_test_acc"])
        for snr, t in sweep:
            tr = harness._mean([r.train_acc for r in t.runs])
            w.writerow([repr(snr), t.method, repr(tr), repr(t.mean), repr(t.std)])
            print(f"{snr:7.2f} dB  {t.method:<12} test {t.mean:6.2f} ({t.std:.2f})  train {tr:6.2f}")


def _load(args, raw_for_csp=False):
    return harness.load_dataset(args.data, args.band, args.window, args.hop, raw_for_csp)


def cmd_train(args) -> None:
    tr, _ = _load(args)
    cfg = _experiment(args)
    model = train(tr, cfg.solver(len(tr.classes), args.seed))
    out = _out(args)
    save_model(out / "model.cpd", model)
    rep = model.report
    acc = accuracy(classify_many(tr.trials, model)[0], tr.labels)
    print(f"trained: rel error {rep.rel_error:.4g}, {rep.iterations} sweeps ({rep.reason}), train acc {acc:.2f}%")
    if args.dump_factors:
        for i, f in enumerate(model.factors):
            np.savetxt(out / f"factor_mode{i + 1}.csv", f, delimiter=",")


def cmd_classify(args) -> None:
    model = load_model(args.model)
    tr, te = _load(args)
    data = te if te is not None else tr
    labels, scores = classify_many(data.trials, model)
    path = _out(args) / "predictions.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial_id", "label", "predicted"] + [f"score_{c}" for c in model.classes])
        for i, (truth, pred, s) in enumerate(zip(data.labels, labels, scores)):
            w.writerow([i, truth, pred] + [repr(float(v)) for v in s])
    print(f"accuracy {accuracy(labels, data.labels):.2f}% on {len(data)} trials -> {path}")


def cmd_rank_sweep(args) -> None:
    tr, te = _load(args)
    cfg = _experiment(args)
    if te is None:
        tr, te = harness.stratified_holdout(tr, cfg.holdout, args.seed)
    best, rows = harness.rank_sweep(tr, te, cfg, args.seed)
    path = _out(args) / "rank_sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "accuracy"])
        for r, acc in rows:
            w.writerow([r, repr(acc)])
    print(f"best rank {best} ({dict(rows)[best]:.2f}%) -> {path}")


def cmd_export_features(args) -> None:
    from .baselines import CPDPipeline, CSPPipeline

    if len(args.method) != 1:
        raise SystemExit("export-features takes exactly one --method")
    method = args.method[0]
    cfg = _experiment(args)
    if method == "csp+lda":
        tr, te = _load(args, raw_for_csp=True)
        pipe = CSPPipeline(cfg.csp_pairs, cfg.ridge).fit(tr)
        train_feats = pipe.features(tr.trials)
    elif method == "cpd+lda":
        tr, te = _load(args)
        rank = len(tr.classes) if cfg.rank in ("classes", "sweep") else int(cfg.rank)
        pipe = CPDPipeline(cfg.solver(rank, args.seed), cfg.ridge).fit(tr)
        train_feats = pipe.train_features_
    else:
        raise SystemExit(f"no features for method {method!r}")
    out = _out(args)
    parts = [("train", tr, train_feats)]
    if te is not None:
        parts.append(("test", te, pipe.features(te.trials)))
    for name, data, feats in parts:
        with open(out / f"features_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial_id", "label"] + [f"f{i + 1}" for i in range(feats.shape[1])])
            for i, (label, row) in enumerate(zip(data.labels, feats)):
                w.writerow([i, label] + [repr(float(v)) for v in row])
        print(f"wrote {out / f'features_{name}.csv'}")


def cmd_evaluate(args) -> None:
    cfg = _experiment(args)
    needs_raw = "csp+lda" in cfg.methods
    tables = []
    if needs_raw and len(cfg.methods) > 1:
        raise SystemExit("evaluate csp+lda on its own (it needs raw data)")
    tr, te = _load(args, raw_for_csp=needs_raw)
    if te is None:
        raise SystemExit("evaluate needs a file with a train/test split")
    band = "full" if args.band is None else f"{args.band[0]:g}-{args.band[1]:g}Hz"
    tables = harness.run_repeated(tr, te, cfg, condition=band)
    out = _out(args)
    harness.write_runs_csv(out / "runs.csv", tables)
    harness.write_table_csv(out / "table.csv", tables)
    for t in tables:
        print(f"{t.method:<12} {t.mean:6.2f} ({t.std:.2f})  over {len(t.runs)} run(s)")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "synth-sweep": cmd_synth_sweep,
    "train": cmd_train,
    "classify": cmd_classify,
    "rank-sweep": cmd_rank_sweep,
    "export-features": cmd_export_features,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, ValueError) as exc:
        print(f"auxcpd: config error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"auxcpd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
