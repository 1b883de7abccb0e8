"""Recording CSV, model JSON and report writers.

Recording files carry the header
``time_s,ch1,ch2,ch3,ch4,ch5,ch6,ch7,ch8,label,level,block``.
Model files are JSON with ``schema_version`` and ``algorithm`` (``knn`` or
``rrrff``). Floats are written with ``repr`` (shortest round-trip form), so
``load(save(m))`` restores every weight bit for bit. All writes go through
a temporary file and an atomic rename.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from .errors import DataError, ValidationError
from .knn import DistanceMetric, KnnConfig, TrainingSet, WeightScheme
from .proportional import KnnModel, ProportionalMap, RestThreshold
from .rrrff import RffMap, RrRffModel
from .signals import DEFAULT_FRAME_RATE_HZ, Gesture, LabeledDataset, N_CHANNELS

RECORDING_HEADER = ["time_s"] + [f"ch{i}" for i in range(1, N_CHANNELS + 1)] + ["label", "level", "block"]
SCHEMA_VERSION = 1

PathLike = Union[str, os.PathLike]


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x: float) -> str:
    return repr(float(x))


# --- recordings --------------------------------------------------------------

def recording_to_csv(data: LabeledDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORDING_HEADER)
    time_s = data.time_s if data.time_s is not None else np.arange(len(data)) / data.frame_rate_hz
    blocks = data.blocks if data.blocks is not None else np.zeros(len(data), dtype=np.int64)
    for t, frame, lab, lv, b in zip(time_s, data.frames, data.labels, data.levels, blocks):
        w.writerow([fmt(t)] + [fmt(v) for v in frame] + [lab, fmt(lv), int(b)])
    return buf.getvalue()


def write_recording(path: PathLike, data: LabeledDataset) -> None:
    atomic_write_text(path, recording_to_csv(data))


def _infer_rate(time_s: np.ndarray) -> float:
    if len(time_s) < 2:
        return DEFAULT_FRAME_RATE_HZ
    step = float(np.median(np.diff(time_s)))
    if not step > 0:
        raise DataError("time_s must be increasing")
    return 1.0 / step


def read_recording(path: PathLike) -> LabeledDataset:
    """Parse a recording CSV; errors name the offending line."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty recording file", line=1) from None
        if header != RECORDING_HEADER:
            raise DataError(f"header must be {','.join(RECORDING_HEADER)}", line=1)
        times, frames, labels, levels, blocks = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RECORDING_HEADER):
                raise DataError(f"expected {len(RECORDING_HEADER)} fields, got {len(row)}", line=lineno)
            try:
                values = [float(v) for v in row[: 1 + N_CHANNELS]]
                level = float(row[10])
                block = int(row[11])
            except ValueError as exc:
                raise DataError(f"bad number: {exc}", line=lineno) from None
            if not all(math.isfinite(v) for v in values + [level]):
                raise DataError("non-finite value", line=lineno)
            if any(v < 0 for v in values[1:]):
                raise DataError("channel values must be rectified (non-negative)", line=lineno)
            try:
                label = Gesture.parse(row[9]).value
            except ValidationError:
                raise DataError(f"unknown label {row[9]!r}", line=lineno) from None
            if not 0 <= level <= 1:
                raise DataError(f"level {level} outside [0, 1]", line=lineno)
            if block < 0:
                raise DataError("block id must be non-negative", line=lineno)
            times.append(values[0])
            frames.append(values[1:])
            labels.append(label)
            levels.append(level)
            blocks.append(block)
    if not frames:
        raise DataError("recording has no data rows", line=2)
    time_s = np.asarray(times)
    try:
        return LabeledDataset(frames=np.asarray(frames), labels=labels, levels=levels,
                              blocks=np.asarray(blocks, dtype=np.int64), time_s=time_s,
                              frame_rate_hz=_infer_rate(time_s))
    except ValidationError as exc:
        raise DataError(str(exc)) from None


# --- models -----------------------------------------------------------------

def _metric_to_dict(metric: DistanceMetric) -> dict:
    d = {"kind": metric.kind}
    if metric.kind == "minkowski":
        d["p"] = metric.p
    if metric.kind == "mahalanobis" and metric.covariance is not None:
        d["covariance"] = metric.covariance.tolist()
    return d


def _metric_from_dict(d: dict) -> DistanceMetric:
    if d["kind"] == "mahalanobis":
        cov = d.get("covariance")
        return DistanceMetric.mahalanobis(None if cov is None else np.asarray(cov, dtype=np.float64))
    if d["kind"] == "minkowski":
        return DistanceMetric.minkowski(d["p"])
    return DistanceMetric.euclidean()


def knn_model_to_dict(model: KnnModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": "knn",
        "config": {
            "k": model.config.k,
            "metric": _metric_to_dict(model.config.metric),
            "weighting": model.config.weighting.value,
        },
        "rest": {"t0": model.rest.t0, "g": model.rest.g, "t": model.rest.t},
        "proportional": {"d": model.prop.d, "m0": model.prop.m0,
                         "class_means": dict(sorted(model.prop.class_means.items()))},
        "train": {"labels": model.train.labels.tolist(), "points": model.train.points.tolist()},
    }


def knn_model_from_dict(d: dict) -> KnnModel:
    cfg = d["config"]
    config = KnnConfig(k=cfg["k"], metric=_metric_from_dict(cfg["metric"]),
                       weighting=WeightScheme.parse(cfg["weighting"]))
    rest = RestThreshold(t0=d["rest"]["t0"], g=d["rest"]["g"])
    prop = ProportionalMap(d=d["proportional"]["d"], m0=d["proportional"]["m0"],
                           class_means=d["proportional"]["class_means"])
    trainset = TrainingSet(np.asarray(d["train"]["points"], dtype=np.float64), d["train"]["labels"])
    return KnnModel(train=trainset, config=config, rest=rest, prop=prop)


def rrrff_model_to_dict(model: RrRffModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": "rrrff",
        "hyperparameters": {
            "D": model.rff.D, "gamma": model.rff.gamma, "lambda": model.lam, "rho": model.rho,
            "seed": model.rff.seed, "smooth_window": model.smooth_window,
        },
        "gesture_order": [g.value for g in model.gesture_order],
        "omega": model.rff.omega.tolist(),
        "beta": model.rff.beta.tolist(),
        "weights": model.weights.tolist(),
    }


def rrrff_model_from_dict(d: dict) -> RrRffModel:
    hp = d["hyperparameters"]
    omega = np.asarray(d["omega"], dtype=np.float64)
    beta = np.asarray(d["beta"], dtype=np.float64)
    rff = RffMap(omega=omega, beta=beta, gamma=float(hp["gamma"]), seed=int(hp["seed"]))
    return RrRffModel(rff=rff, weights=np.asarray(d["weights"], dtype=np.float64).reshape(len(beta), -1),
                      lam=float(hp["lambda"]), rho=float(hp["rho"]),
                      gesture_order=tuple(Gesture.parse(g) for g in d["gesture_order"]),
                      smooth_window=int(hp["smooth_window"]))


def model_to_dict(model) -> dict:
    if isinstance(model, KnnModel):
        return knn_model_to_dict(model)
    if isinstance(model, RrRffModel):
        return rrrff_model_to_dict(model)
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported model schema_version {d.get('schema_version')!r}")
    algo = d.get("algorithm")
    try:
        if algo == "knn":
            return knn_model_from_dict(d)
        if algo == "rrrff":
            return rrrff_model_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise DataError(f"incomplete {algo} model file: {exc}") from None
    raise DataError(f"unknown model algorithm {algo!r}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False, allow_nan=False) + "\n"


def save_model(path: PathLike, model) -> None:
    atomic_write_text(path, dumps(model_to_dict(model)))


def load_model(path: PathLike):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(d, dict):
        raise DataError("model file must hold a JSON object")
    return model_from_dict(d)


# --- reports ----------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def report_csv(rows: Iterable[dict], columns: Sequence[str], config: Optional[dict] = None) -> str:
    """CSV text; the effective configuration goes in a leading ``#`` comment line."""
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True, allow_nan=False) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def write_report(path: PathLike, rows: Iterable[dict], columns: Sequence[str],
                 config: Optional[dict] = None) -> None:
    atomic_write_text(path, report_csv(rows, columns, config))


def read_value_table(path: PathLike) -> List[dict]:
    """Rows of a CSV file, skipping ``#`` comment lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
