"""Rest thresholding, proportional scaling and the full kNN predictor."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, TrainingError
from .knn import KnnConfig, TrainingSet, classify, classify_many, fit_metric
from .signals import ACTIVE_GESTURES, Gesture, LabeledDataset, as_frame, normalize, normalize_many

DEFAULT_GAIN = 2.5
DEFAULT_DIVISOR = 5.0


class DegenerateClassWarning(UserWarning):
    """A class mean magnitude does not exceed the proportional offset."""


class Prediction(NamedTuple):
    label: Gesture
    proportion: float


REST_PREDICTION = Prediction(Gesture.REST, 0.0)


@dataclass(frozen=True)
class RestThreshold:
    t0: float
    g: float = DEFAULT_GAIN

    def __post_init__(self):
        if not self.g > 0:
            raise ConfigError(f"gain must be positive, got {self.g}")
        if not self.t0 >= 0:
            raise ConfigError(f"rest baseline must be non-negative, got {self.t0}")

    @property
    def t(self) -> float:
        return self.g * self.t0


@dataclass(frozen=True)
class ProportionalMap:
    """Linear map from magnitude to intent, anchored at ``m0 -> 0`` and ``Mc -> 1``."""

    d: float
    m0: float
    class_means: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.d >= 1:
            raise ConfigError(f"divisor must be >= 1, got {self.d}")
        means = {Gesture.parse(k).value: float(v) for k, v in dict(self.class_means).items()}
        if Gesture.REST.value in means:
            raise ConfigError("rest has no class mean")
        for k, v in means.items():
            if not v > 0:
                raise TrainingError(f"class mean for {k} must be positive, got {v}")
        object.__setattr__(self, "class_means", means)

    @classmethod
    def from_threshold(cls, rest: RestThreshold, d: float, class_means) -> "ProportionalMap":
        if not d >= 1:
            raise ConfigError(f"divisor must be >= 1, got {d}")
        return cls(d=float(d), m0=rest.t / d, class_means=class_means)


def fit_rest_threshold(rest_magnitudes: Sequence[float], g: float = DEFAULT_GAIN) -> RestThreshold:
    mags = np.asarray(rest_magnitudes, dtype=np.float64)
    if mags.size == 0:
        raise TrainingError("no rest frames to fit the rest threshold")
    if np.any(mags < 0) or not np.all(np.isfinite(mags)):
        raise TrainingError("rest magnitudes must be finite and non-negative")
    return RestThreshold(t0=float(mags.mean()), g=float(g))


def is_rest(m: float, rest: RestThreshold) -> bool:
    # activity needs strict exceedance of the threshold
    return m <= rest.t


def fit_class_means(data: LabeledDataset, classes: Optional[Sequence] = None) -> Dict[str, float]:
    """Mean magnitude per non-rest class, pooled over stimulus levels."""
    mags = data.frames.mean(axis=1)
    if classes is None:
        present = set(data.labels.tolist())
        classes = [g for g in ACTIVE_GESTURES if g.value in present]
    means = {}
    for g in classes:
        g = Gesture.parse(g)
        if g is Gesture.REST:
            continue
        sel = data.labels == g.value
        if not np.any(sel):
            raise TrainingError(f"class {g.value} has no training frames")
        means[g.value] = float(mags[sel].mean())
    return means


def proportional_value(m: float, label, prop: ProportionalMap) -> float:
    key = Gesture.parse(label).value
    if key not in prop.class_means:
        raise KeyError(f"no class mean for label {key!r}")
    mc = prop.class_means[key]
    if mc <= prop.m0:
        warnings.warn(
            f"class {key}: mean magnitude {mc:g} <= offset {prop.m0:g}; "
            "proportional output fixed at 1", DegenerateClassWarning, stacklevel=2)
        return 1.0
    p = (m - prop.m0) / (mc - prop.m0)
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class KnnModel:
    train: TrainingSet
    config: KnnConfig
    rest: RestThreshold
    prop: ProportionalMap

    def __post_init__(self):
        if set(self.prop.class_means) != {g.value for g in self.train.classes}:
            raise TrainingError("class means must cover exactly the trained classes")
        if self.config.k > len(self.train):
            raise ConfigError(f"k={self.config.k} exceeds training size {len(self.train)}")
        if not self.config.metric.is_fitted:
            cfg = KnnConfig(self.config.k, fit_metric(self.config.metric, self.train.points),
                            self.config.weighting)
            object.__setattr__(self, "config", cfg)

    def __call__(self, frame) -> Prediction:
        return predict(frame, self)

    def predict_many(self, frames) -> list:
        """Predictions for a stream; identical to mapping :func:`predict`."""
        directions, mags = normalize_many(frames)
        active = (mags > self.rest.t) & (mags > 0)
        out = [REST_PREDICTION] * len(mags)
        if np.any(active):
            labels = classify_many(directions[active], self.train, self.config)
            for i, lab in zip(np.flatnonzero(active), labels):
                out[i] = Prediction(Gesture(lab), proportional_value(float(mags[i]), lab, self.prop))
        return out


def predict(frame, model: KnnModel) -> Prediction:
    arr = as_frame(frame)
    nf = normalize(arr)
    if nf.magnitude == 0 or is_rest(nf.magnitude, model.rest):
        return REST_PREDICTION
    label = classify(nf, model.train, model.config)
    return Prediction(label, proportional_value(nf.magnitude, label, model.prop))


def train(data: LabeledDataset, g: float = DEFAULT_GAIN, d: float = DEFAULT_DIVISOR,
          config: Union[KnnConfig, str, None] = None, *, auto_k: bool = False,
          k_candidates: Optional[Sequence[int]] = None) -> KnnModel:
    """Fit rest threshold, class means and the kNN training set.

    With ``auto_k=True`` (or ``config="auto"``) k is chosen by block-wise
    cross-validation over ``k_candidates``, keeping the metric and weighting
    of ``config``.
    Rest frames only feed the threshold; they never enter the neighbour
    search. Non-rest frames with zero magnitude have no direction and are
    dropped from the training set.
    """
    if config is None:
        config = KnnConfig()
    rest_mask = data.rest_mask
    if not np.any(rest_mask):
        raise TrainingError("training data contains no rest frames")
    if np.all(rest_mask):
        raise TrainingError("training data contains no gesture frames")
    directions, mags = normalize_many(data.frames)
    rest = fit_rest_threshold(mags[rest_mask], g)
    usable = ~rest_mask & (mags > 0)
    if not np.any(usable):
        raise TrainingError("all gesture frames have zero magnitude")
    trainset = TrainingSet(directions[usable], data.labels[usable])
    means = fit_class_means(data, trainset.classes)
    prop = ProportionalMap.from_threshold(rest, d, means)

    if isinstance(config, str):
        if config != "auto":
            raise ConfigError(f"config must be a KnnConfig or 'auto', got {config!r}")
        config, auto_k = KnnConfig(), True
    if auto_k:
        from .selection import select_k

        k, _ = select_k(data, k_candidates, config.metric, config.weighting)
        config = KnnConfig(k=k, metric=config.metric, weighting=config.weighting)
    return KnnModel(train=trainset, config=config, rest=rest, prop=prop)
