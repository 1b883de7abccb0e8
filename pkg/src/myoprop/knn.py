"""Distance metrics, linear-scan neighbour search and weighted voting."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, NumericError, TrainingError
from .signals import ACTIVE_GESTURES, Gesture, N_CHANNELS, NormalizedFrame

EPS = 1e-12
_CHUNK_ELEMENTS = 1 << 21


class WeightScheme(str, Enum):
    UNIFORM = "uniform"
    INVERSE = "inverse"
    INVERSE_SQUARED = "inverse_squared"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text) -> "WeightScheme":
        if isinstance(text, cls):
            return text
        aliases = {"inv": cls.INVERSE, "inv-sq": cls.INVERSE_SQUARED,
                   "inv_sq": cls.INVERSE_SQUARED}
        key = str(text).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown weighting {text!r}") from None

    @property
    def cli_name(self) -> str:
        return {"uniform": "uniform", "inverse": "inv", "inverse_squared": "inv-sq"}[self.value]


@dataclass(frozen=True)
class DistanceMetric:
    """One of ``minkowski(p)``, ``euclidean`` or ``mahalanobis(covariance)``.

    A Mahalanobis metric without a covariance is a placeholder that gets
    fitted from the training points (see :func:`fit_metric`).
    """

    kind: str = "euclidean"
    p: float = 2.0
    covariance: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    _whitener: Optional[np.ndarray] = field(default=None, init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("minkowski", "euclidean", "mahalanobis"):
            raise ConfigError(f"unknown metric {self.kind!r}")
        if self.kind == "minkowski" and not (np.isfinite(self.p) and self.p >= 1):
            raise ConfigError(f"minkowski p must be >= 1, got {self.p}")
        if self.kind == "euclidean":
            object.__setattr__(self, "p", 2.0)
        if self.kind == "mahalanobis" and self.covariance is not None:
            cov = np.array(self.covariance, dtype=np.float64)
            if cov.shape != (N_CHANNELS, N_CHANNELS):
                raise DimensionError(f"covariance must be {N_CHANNELS}x{N_CHANNELS}")
            if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
                raise NumericError("covariance is not symmetric")
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise NumericError("covariance is not positive definite") from None
            # d(a, b) = || L^-1 (a - b) || with C = L L^T
            whitener = linalg.solve_triangular(chol, np.eye(N_CHANNELS), lower=True)
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_whitener", whitener)

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def minkowski(cls, p: float):
        return cls("minkowski", float(p))

    @classmethod
    def mahalanobis(cls, covariance=None):
        return cls("mahalanobis", covariance=covariance)

    @classmethod
    def parse(cls, text) -> "DistanceMetric":
        """Parse ``euclidean``, ``minkowski:P`` or ``mahalanobis``."""
        if isinstance(text, cls):
            return text
        name, _, arg = str(text).strip().lower().partition(":")
        if name == "euclidean" and not arg:
            return cls.euclidean()
        if name == "mahalanobis" and not arg:
            return cls.mahalanobis()
        if name == "minkowski":
            try:
                return cls.minkowski(float(arg) if arg else 2.0)
            except ValueError:
                raise ConfigError(f"bad minkowski exponent in {text!r}") from None
        raise ConfigError(f"unknown metric {text!r}")

    @property
    def name(self) -> str:
        if self.kind == "minkowski":
            return f"minkowski:{self.p:g}"
        return self.kind

    @property
    def is_fitted(self) -> bool:
        return self.kind != "mahalanobis" or self.covariance is not None


def pooled_covariance(points) -> np.ndarray:
    """Covariance of all training points, ridge-regularised to be invertible.

    Adds ``1e-6 * trace(C) / 8`` to the diagonal. A zero-trace covariance
    (one point, or identical points) falls back to the identity.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(pts) < 2:
        cov = np.zeros((N_CHANNELS, N_CHANNELS))
    else:
        cov = np.cov(pts, rowvar=False)
    tr = np.trace(cov)
    if not tr > 0:
        return np.eye(N_CHANNELS)
    return cov + (1e-6 * tr / N_CHANNELS) * np.eye(N_CHANNELS)


def fit_metric(metric: DistanceMetric, points) -> DistanceMetric:
    if metric.is_fitted:
        return metric
    return DistanceMetric.mahalanobis(pooled_covariance(points))


def pairwise_distances(queries, points, metric: DistanceMetric) -> np.ndarray:
    """Distances from each query row to each point row, shape ``(nq, np)``.

    Every other distance computation in the package goes through here so
    that single queries and batched cross-validation agree bit for bit.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if q.shape[1] != x.shape[1]:
        raise DimensionError(f"dimension mismatch: {q.shape[1]} vs {x.shape[1]}")
    rows = max(1, _CHUNK_ELEMENTS // max(1, x.shape[0] * x.shape[1]))
    if len(q) > rows:
        return np.vstack([pairwise_distances(q[i:i + rows], x, metric)
                          for i in range(0, len(q), rows)])
    diff = q[:, None, :] - x[None, :, :]
    if metric.kind == "mahalanobis":
        if not metric.is_fitted:
            raise ConfigError("mahalanobis metric has no covariance; fit it first")
        if q.shape[1] != N_CHANNELS:
            raise DimensionError("mahalanobis metric is defined on 8-channel vectors")
        diff = diff @ metric._whitener.T
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if metric.p == 2.0:
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if metric.p == 1.0:
        return np.abs(diff).sum(axis=2)
    return (np.abs(diff) ** metric.p).sum(axis=2) ** (1.0 / metric.p)


def distance(a, b, metric: DistanceMetric = DistanceMetric()) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"cannot compare shapes {a.shape} and {b.shape}")
    return float(pairwise_distances(a, b, metric)[0, 0])


def weight(d: float, scheme: WeightScheme) -> float:
    scheme = WeightScheme.parse(scheme)
    if scheme is WeightScheme.UNIFORM:
        return 1.0
    d = max(float(d), EPS)
    if scheme is WeightScheme.INVERSE:
        return 1.0 / d
    return 1.0 / (d * d)


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    metric: DistanceMetric = field(default_factory=DistanceMetric.euclidean)
    weighting: WeightScheme = WeightScheme.INVERSE_SQUARED

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "metric", DistanceMetric.parse(self.metric))
        object.__setattr__(self, "weighting", WeightScheme.parse(self.weighting))


class TrainingSet:
    """Normalised non-rest training directions with their labels."""

    def __init__(self, points, labels):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        labs = np.asarray([Gesture.parse(v).value for v in labels], dtype="<U5")
        if len(pts) == 0 or pts.shape[1] == 0:
            raise TrainingError("training set is empty")
        if len(pts) != len(labs):
            raise TrainingError("points and labels differ in length")
        if np.any(labs == Gesture.REST.value):
            raise TrainingError("rest frames do not belong in the kNN training set")
        if not np.all(np.isfinite(pts)):
            raise TrainingError("training points must be finite")
        pts.setflags(write=False)
        labs.setflags(write=False)
        self.points = pts
        self.labels = labs

    def __len__(self):
        return len(self.points)

    @property
    def classes(self) -> Tuple[Gesture, ...]:
        present = set(self.labels.tolist())
        return tuple(g for g in ACTIVE_GESTURES if g.value in present)


def neighbors(query, train: TrainingSet, k: int,
              metric: DistanceMetric = DistanceMetric()) -> list:
    """The ``k`` nearest training points as ``(index, distance)`` pairs.

    Exhaustive scan; equal distances are ordered by training index.
    """
    if int(k) != k or not 1 <= k <= len(train):
        raise ConfigError(f"k={k} outside [1, {len(train)}]")
    d = pairwise_distances(query, train.points, metric)[0]
    order = np.argsort(d, kind="stable")[: int(k)]
    return [(int(i), float(d[i])) for i in order]


def vote(neighbours: Sequence[Tuple[object, float]], scheme: WeightScheme) -> Gesture:
    """Weighted majority vote over ``(label, distance)`` pairs sorted nearest first.

    Any neighbour closer than 1e-12 is an exact match: the plain majority
    among exact matches wins outright. Otherwise the class with the largest
    summed weight wins. Ties go to whichever tied class appears first in
    the list, i.e. the nearest.
    """
    if len(neighbours) == 0:
        raise ValueError("cannot vote with no neighbours")
    scheme = WeightScheme.parse(scheme)
    exact = [(lab, d) for lab, d in neighbours if d < EPS]
    if exact:
        scores = defaultdict(float)
        for lab, _ in exact:
            scores[str(lab)] += 1.0
        candidates = exact
    else:
        scores = defaultdict(float)
        for lab, d in neighbours:
            scores[str(lab)] += weight(d, scheme)
        candidates = neighbours
    best = max(scores.values())
    for lab, _ in candidates:
        if scores[str(lab)] == best:
            return Gesture.parse(lab)
    raise AssertionError("unreachable")


def classify(query: NormalizedFrame, train: TrainingSet, config: KnnConfig = KnnConfig()) -> Gesture:
    direction = query.direction if isinstance(query, NormalizedFrame) else query
    metric = config.metric
    if not metric.is_fitted:
        metric = fit_metric(metric, train.points)
    nb = neighbors(direction, train, config.k, metric)
    return vote([(train.labels[i], d) for i, d in nb], config.weighting)


def classify_many(directions, train: TrainingSet, config: KnnConfig = KnnConfig()) -> np.ndarray:
    """Batch version of :func:`classify`; returns label strings."""
    metric = config.metric
    if not metric.is_fitted:
        metric = fit_metric(metric, train.points)
    if not 1 <= config.k <= len(train):
        raise ConfigError(f"k={config.k} outside [1, {len(train)}]")
    dist = pairwise_distances(directions, train.points, metric)
    return _vote_rows(dist, train.labels, config.k, config.weighting)


def _vote_rows(dist: np.ndarray, labels: np.ndarray, k: int, scheme: WeightScheme) -> np.ndarray:
    if k == 1:
        # a single voter always wins; argmin keeps the lowest index on ties
        return labels[np.argmin(dist, axis=1)].astype("<U5")
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return vote_sorted(np.take_along_axis(dist, order, axis=1), labels[order], k, scheme)


def vote_sorted(dist: np.ndarray, labels: np.ndarray, k: int, scheme: WeightScheme) -> np.ndarray:
    """Row-wise :func:`vote` over neighbour matrices already sorted nearest first.

    Scores accumulate column by column, in the same order as the scalar
    vote, so both give identical results including ties.
    """
    scheme = WeightScheme.parse(scheme)
    d = dist[:, :k]
    classes, codes = np.unique(labels[:, :k], return_inverse=True)
    codes = codes.reshape(d.shape)
    exact = d < EPS
    has_exact = exact.any(axis=1)
    if scheme is WeightScheme.UNIFORM:
        w = np.ones_like(d)
    else:
        floored = np.maximum(d, EPS)
        w = 1.0 / floored if scheme is WeightScheme.INVERSE else 1.0 / (floored * floored)
    w = np.where(has_exact[:, None], exact.astype(np.float64), w)
    rows = np.arange(len(d))
    scores = np.zeros((len(d), len(classes)))
    for j in range(d.shape[1]):
        scores[rows, codes[:, j]] += w[:, j]
    best = scores.max(axis=1)
    # nearest neighbour whose class reaches the best score; under the exact
    # rule only exact matches score, and they sort first
    tied = scores[rows[:, None], codes] == best[:, None]
    first = np.argmax(tied, axis=1)
    return classes[codes[rows, first]].astype("<U5")
