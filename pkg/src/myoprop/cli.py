"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import (
    ConfigError,
    CvError,
    DataError,
    DimensionError,
    InputError,
    MyopropError,
    NumericError,
    ReportError,
    TrainingError,
    ValidationError,
)
from .harness import (
    Protocol,
    anova_groups,
    compare,
    evaluate,
    subject_table,
    trials_from_recording,
)
from .io import (
    atomic_write_text,
    dumps,
    load_model,
    model_to_dict,
    read_recording,
    read_value_table,
    save_model,
    write_recording,
    write_report,
)
from .knn import DistanceMetric, KnnConfig, WeightScheme
from .proportional import DEFAULT_DIVISOR, DEFAULT_GAIN, KnnModel, train
from .rrrff import DEFAULT_N_FEATURES, DEFAULT_REST_ACTIVATION, DEFAULT_RIDGE, fit_rrrff
from .selection import cross_validate
from .signals import DEFAULT_SMOOTH_WINDOW, STUDY_GESTURES, smooth
from .stats import anova_oneway
from .synth import SynthConfig, generate_session, generate_trials

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

TRIAL_COLUMNS = ["algorithm", "level", "trial_id", "success", "time_to_success_s"]
SR_COLUMNS = ["algorithm", "level", "n_trials", "successes", "success_rate"]
CV_COLUMNS = ["k", "metric", "weighting", "accuracy"]
SUBJECT_COLUMNS = ["algorithm", "subject", "level", "success_rate"]
RRRFF_NOTE = "RR-RFF features, D, lambda, rho and targets are implementation choices"


class UsageError(MyopropError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(message)


def _default_seed() -> int:
    env = os.environ.get("MYOPROP_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"MYOPROP_SEED must be an integer, got {env!r}") from None


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _k_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be 'auto' or an integer, got {text!r}")
    return k


def _gamma_arg(text: str):
    if text in ("median", "median-heuristic"):
        return "median-heuristic"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be 'median' or a number, got {text!r}")


def _add_protocol_args(p):
    p.add_argument("--tolerance", type=float, default=0.15)
    p.add_argument("--dwell", type=float, default=0.5, help="hold time in seconds")
    p.add_argument("--timeout", type=float, default=10.0, help="seconds")
    p.add_argument("--smooth", type=int, default=DEFAULT_SMOOTH_WINDOW,
                   help="envelope window applied to trial streams (frames)")
    p.add_argument("--levels", type=_float_list, default=[0.33, 0.67, 1.0])


def _add_knn_args(p):
    p.add_argument("--g", type=float, default=DEFAULT_GAIN, help="rest threshold gain")
    p.add_argument("--d", type=float, default=DEFAULT_DIVISOR, help="proportional offset divisor")
    p.add_argument("--k", type=_k_arg, default=1, help="'auto' or a positive integer")
    p.add_argument("--metric", default="euclidean", help="euclidean | minkowski:P | mahalanobis")
    p.add_argument("--weight", default="inv-sq", help="uniform | inv | inv-sq")


def _add_rrrff_args(p):
    p.add_argument("--features", type=int, default=DEFAULT_N_FEATURES, help="random features D")
    p.add_argument("--gamma", type=_gamma_arg, default="median-heuristic")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--rho", type=float, default=DEFAULT_REST_ACTIVATION)
    p.add_argument("--train-smooth", type=int, default=DEFAULT_SMOOTH_WINDOW,
                   help="smoothing window for regression training frames")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="myoprop", description="Proportional kNN myocontrol toolkit")
    parser.add_argument("--version", action="version", version=f"myoprop {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic recording")
    p.add_argument("--script", help="JSON action script (required unless --trials)")
    p.add_argument("--config", help="JSON generator configuration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", action="store_true",
                   help="emit a trial recording (one block per goal-directed trial)")
    p.add_argument("--gestures", default=",".join(g.value for g in STUDY_GESTURES))
    p.add_argument("--levels", type=_float_list, default=[0.33, 0.67, 1.0])
    p.add_argument("--repeats", type=int, default=2)
    p.add_argument("--duration", type=float, default=4.0, help="trial length in seconds")

    p = sub.add_parser("train", help="fit a kNN or RR-RFF model")
    p.add_argument("--data", required=True)
    p.add_argument("--algo", choices=["knn", "rrrff"], default="knn")
    _add_knn_args(p)
    _add_rrrff_args(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("crossval", help="block-wise cross-validation grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", dest="ks", default=None, help="comma-separated k values")
    p.add_argument("--metrics", default="euclidean,minkowski:1,minkowski:3,mahalanobis")
    p.add_argument("--weights", default="uniform,inv,inv-sq")

    p = sub.add_parser("predict", help="label every frame of a recording")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--smooth", type=int, default=1)

    p = sub.add_parser("eval", help="success rates of one model on trial recordings")
    p.add_argument("--model", required=True)
    p.add_argument("--trials", required=True)
    _add_protocol_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trials-out", default=None, help="optional per-trial table")

    p = sub.add_parser("compare", help="train both pipelines and compare success rates")
    p.add_argument("--train", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    _add_knn_args(p)
    _add_rrrff_args(p)
    _add_protocol_args(p)

    p = sub.add_parser("anova", help="one-way ANOVA over CSV groups")
    p.add_argument("--groups", required=True,
                   help="one CSV per group, or a single CSV with a group column")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--group-col", default=None)
    p.add_argument("--value-col", default=None)
    return parser


def _knn_config(args) -> KnnConfig:
    k = 1 if args.k == "auto" else args.k
    return KnnConfig(k=k, metric=DistanceMetric.parse(args.metric),
                     weighting=WeightScheme.parse(args.weight))


def _knn_params(args) -> dict:
    return dict(g=args.g, d=args.d, config=_knn_config(args), auto_k=args.k == "auto")


def _rrrff_params(args, seed: int) -> dict:
    return dict(D=args.features, gamma=args.gamma, lam=args.lam, rho=args.rho, seed=seed,
                smooth_window=args.train_smooth)


def _protocol(args) -> Protocol:
    return Protocol(tolerance=args.tolerance, dwell_s=args.dwell, timeout_s=args.timeout,
                    smooth_window=args.smooth, levels=tuple(args.levels))


def model_summary(model) -> dict:
    """Model description without the training payload or weights."""
    d = model_to_dict(model)
    for key in ("train", "omega", "beta", "weights"):
        d.pop(key, None)
    if d["algorithm"] == "knn":
        d["config"]["metric"].pop("covariance", None)
        d["n_train"] = len(model.train)
    return d


def _load_script(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid script JSON: {exc.msg}", line=exc.lineno) from None
    reps = 1
    if isinstance(doc, dict):
        reps = doc.get("repetitions", 1)
        doc = doc.get("actions")
    if not isinstance(doc, list):
        raise DataError("script must be a list of actions or an object with 'actions'")
    actions = []
    for i, a in enumerate(doc):
        if isinstance(a, dict):
            a = (a.get("label"), a.get("intensity", 1.0), a.get("duration_s"))
        if not isinstance(a, (list, tuple)) or len(a) != 3 or a[2] is None:
            raise DataError(f"action {i} must be (label, intensity, duration_s)")
        actions.append((str(a[0]), float(a[1]), float(a[2])))
    return actions, reps


def cmd_synth(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    cfg_dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg_dict = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid config JSON: {exc.msg}", line=exc.lineno) from None
    cfg_dict["seed"] = seed
    config = SynthConfig.from_dict(cfg_dict)
    if args.trials:
        gestures = [g for g in args.gestures.split(",") if g]
        data = generate_trials(config, gestures, args.levels, args.repeats, args.duration)
    else:
        if not args.script:
            raise UsageError("synth needs --script unless --trials is given")
        actions, reps = _load_script(args.script)
        data = generate_session(actions, config, repetitions=reps)
    write_recording(args.out, data)
    return EXIT_OK


def cmd_train(args) -> int:
    data = read_recording(args.data)
    seed = _default_seed() if args.seed is None else args.seed
    if args.algo == "knn":
        model = train(data, **_knn_params(args))
    else:
        model = fit_rrrff(data, **_rrrff_params(args, seed))
    save_model(args.out, model)
    return EXIT_OK


def cmd_crossval(args) -> int:
    data = read_recording(args.data)
    ks = None if args.ks is None else [int(v) for v in args.ks.split(",") if v]
    metrics = [m for m in args.metrics.split(",") if m]
    weights = [WeightScheme.parse(w).value for w in args.weights.split(",") if w]
    report = cross_validate(data, ks, metrics, weights)
    config = {"command": "crossval", "data": Path(args.data).name,
              "k_candidates": sorted({r.k for r in report.rows}), "metrics": metrics,
              "weightings": weights, "chosen": list(report.chosen)}
    write_report(args.out, report.to_rows(), CV_COLUMNS, config)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    data = read_recording(args.data)
    frames = smooth(data.frames, args.smooth)
    preds = model.predict_many(frames)
    rows = [dict(time_s=float(t), label=p.label.value, proportion=float(p.proportion))
            for t, p in zip(data.time_s, preds)]
    config = {"command": "predict", "model": model_summary(model), "smooth": args.smooth}
    write_report(args.out, rows, ["time_s", "label", "proportion"], config)
    return EXIT_OK


def _trial_rows(records):
    return [dict(algorithm=r.algorithm, level=f"{r.level:g}", trial_id=r.trial_id,
                 success=r.success, time_to_success_s=r.time_to_success_s) for r in records]


def cmd_eval(args) -> int:
    model = load_model(args.model)
    trials = trials_from_recording(read_recording(args.trials))
    protocol = _protocol(args)
    algo = "knn" if isinstance(model, KnnModel) else "rrrff"
    report, records = evaluate(algo, model, trials, protocol)
    config = {"command": "eval", "model": model_summary(model), "protocol": protocol.to_dict(),
              "trials": Path(args.trials).name}
    if algo == "rrrff":
        config["note"] = RRRFF_NOTE
    write_report(args.out, report.to_rows(), SR_COLUMNS, config)
    if args.trials_out:
        write_report(args.trials_out, _trial_rows(records), TRIAL_COLUMNS, config)
    return EXIT_OK


def cmd_compare(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    data = read_recording(args.train)
    trials = trials_from_recording(read_recording(args.trials))
    protocol = _protocol(args)
    knn_rep, rr_rep, records, (knn_model, rr_model), order = compare(
        data, trials, _knn_params(args), _rrrff_params(args, seed), protocol, seed)
    groups = anova_groups(records)
    try:
        anova_text = anova_oneway([groups["knn"], groups["rrrff"]], alphas=(0.05,)).summary()
    except InputError as exc:
        # e.g. both pipelines succeed on every trial
        anova_text = f"ANOVA undefined: {exc}"
    config = {
        "command": "compare", "seed": seed, "train": Path(args.train).name,
        "trials": Path(args.trials).name, "protocol": protocol.to_dict(),
        "knn": model_summary(knn_model), "rrrff": model_summary(rr_model),
        "presentation_order": order,
        "note": RRRFF_NOTE,
    }
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "sr_knn.csv", knn_rep.to_rows(), SR_COLUMNS, config)
    write_report(out / "sr_rrrff.csv", rr_rep.to_rows(), SR_COLUMNS, config)
    write_report(out / "trials.csv", _trial_rows(records), TRIAL_COLUMNS, config)
    write_report(out / "subjects.csv", subject_table(records), SUBJECT_COLUMNS, config)
    text = ("one-way ANOVA on per-trial success, groups: knn, rrrff\n"
            f"{anova_text}\n"
            f"mean SR knn = {knn_rep.overall!r}\nmean SR rrrff = {rr_rep.overall!r}\n"
            "config: " + json.dumps(config, sort_keys=True) + "\n")
    atomic_write_text(out / "anova.txt", text)
    atomic_write_text(out / "config.json", dumps(config))
    return EXIT_OK


def _read_groups(paths, group_col, value_col):
    groups = {}
    if len(paths) == 1:
        rows = read_value_table(paths[0])
        if not rows:
            raise DataError(f"{paths[0]}: no rows")
        gcol = group_col or "group"
        vcol = value_col or "value"
        for i, row in enumerate(rows, start=2):
            if gcol not in row or vcol not in row:
                raise DataError(f"{paths[0]}: needs columns {gcol!r} and {vcol!r}", line=1)
            groups.setdefault(row[gcol], []).append(_number(row[vcol], paths[0], i))
        return list(groups.values())
    out = []
    for path in paths:
        rows = read_value_table(path)
        if not rows:
            raise DataError(f"{path}: no rows")
        cols = list(rows[0])
        vcol = value_col or ("value" if "value" in cols else cols[0] if len(cols) == 1 else None)
        if vcol is None or vcol not in cols:
            raise DataError(f"{path}: cannot tell which column holds the values", line=1)
        out.append([_number(r[vcol], path, i) for i, r in enumerate(rows, start=2)])
    return out


def _number(text, path, line):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise DataError(f"{path}: not a number: {text!r}", line=line) from None


def cmd_anova(args) -> int:
    paths = [p for p in args.groups.split(",") if p]
    groups = _read_groups(paths, args.group_col, args.value_col)
    result = anova_oneway(groups, alphas=(args.alpha,))
    print(result.summary())
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth, "train": cmd_train, "crossval": cmd_crossval, "predict": cmd_predict,
    "eval": cmd_eval, "compare": cmd_compare, "anova": cmd_anova,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"myoprop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"myoprop: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValidationError, TrainingError, CvError, InputError, DimensionError,
            ReportError) as exc:
        print(f"myoprop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"myoprop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
