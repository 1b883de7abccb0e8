"""Block-wise cross-validation for k, metric and weighting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, CvError
from .knn import (
    DistanceMetric,
    WeightScheme,
    fit_metric,
    pairwise_distances,
    vote_sorted,
)
from .signals import LabeledDataset, check_contiguous_blocks, normalize_many

N_FALLBACK_BLOCKS = 5


@dataclass(frozen=True)
class CvRow:
    k: int
    metric: str
    weighting: str
    accuracy: float


@dataclass(frozen=True)
class CvReport:
    rows: Tuple[CvRow, ...]
    chosen: Tuple[int, str, str]

    def to_rows(self) -> List[dict]:
        return [dict(k=r.k, metric=r.metric, weighting=r.weighting, accuracy=r.accuracy)
                for r in self.rows]


def make_blocks(data: LabeledDataset) -> List[np.ndarray]:
    """Index arrays, one per contiguous block id.

    Without block ids the recording is cut into five contiguous pieces of
    (nearly) equal size.
    """
    n = len(data)
    if data.blocks is None:
        if n < N_FALLBACK_BLOCKS:
            raise CvError(f"need at least {N_FALLBACK_BLOCKS} frames to split into blocks, got {n}")
        blocks = np.array_split(np.arange(n), N_FALLBACK_BLOCKS)
    else:
        check_contiguous_blocks(data.blocks)
        starts = np.flatnonzero(np.concatenate([[True], data.blocks[1:] != data.blocks[:-1]]))
        bounds = np.append(starts, n)
        blocks = [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    if len(blocks) < 2:
        raise CvError("cross-validation needs at least two blocks")
    return blocks


def _cv_folds(data: LabeledDataset):
    """Per-block (directions, labels) of the usable non-rest frames."""
    directions, mags = normalize_many(data.frames)
    keep = (~data.rest_mask) & (mags > 0)
    folds = []
    for idx in make_blocks(data):
        idx = idx[keep[idx]]
        if len(idx):
            folds.append((directions[idx], data.labels[idx]))
    if len(folds) < 2:
        raise CvError("fewer than two blocks contain gesture frames")
    return folds


def default_k_grid(n_train: int) -> List[int]:
    """Odd k from 1 up to ``ceil(0.1 * n_train)``."""
    cap = max(1, math.ceil(0.10 * n_train))
    return list(range(1, cap + 1, 2))


def _evaluate(folds, ks: Sequence[int], metric: DistanceMetric,
              schemes: Sequence[WeightScheme]) -> dict:
    """Correct counts for every (k, scheme), reusing one distance matrix per fold."""
    correct = {(k, s): 0 for k in ks for s in schemes}
    total = 0
    for held in range(len(folds)):
        test_x, test_y = folds[held]
        train_x = np.vstack([f[0] for j, f in enumerate(folds) if j != held])
        train_y = np.concatenate([f[1] for j, f in enumerate(folds) if j != held])
        if max(ks) > len(train_x):
            raise ConfigError(
                f"k={max(ks)} exceeds the smallest training fold ({len(train_x)} frames)")
        fold_metric = fit_metric(metric, train_x)
        dist = pairwise_distances(test_x, train_x, fold_metric)
        # one stable sort serves every k
        order = np.argsort(dist, axis=1, kind="stable")[:, :max(ks)]
        near_d = np.take_along_axis(dist, order, axis=1)
        near_y = train_y[order]
        for k in ks:
            for s in schemes:
                pred = vote_sorted(near_d, near_y, k, s)
                correct[(k, s)] += int(np.sum(pred == test_y))
        total += len(test_y)
    return {key: c / total for key, c in correct.items()}


def cv_accuracy(data: LabeledDataset, k: int,
                metric: DistanceMetric = DistanceMetric.euclidean(),
                weighting: WeightScheme = WeightScheme.INVERSE_SQUARED) -> float:
    """Leave-one-block-out accuracy of the bare classifier on non-rest frames.

    Mahalanobis covariance is re-fitted on each training fold.
    """
    if int(k) != k or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k}")
    metric = DistanceMetric.parse(metric)
    weighting = WeightScheme.parse(weighting)
    return _evaluate(_cv_folds(data), [int(k)], metric, [weighting])[(int(k), weighting)]


def _pick(rows: Sequence[CvRow]) -> Tuple[int, str, str]:
    # highest accuracy, then smallest k, then grid order
    best = max(r.accuracy for r in rows)
    winner = min((r for r in rows if r.accuracy == best), key=lambda r: r.k)
    return (winner.k, winner.metric, winner.weighting)


def cross_validate(data: LabeledDataset, k_candidates: Optional[Iterable[int]] = None,
                   metrics: Sequence = ("euclidean",),
                   weightings: Sequence = ("inverse_squared",)) -> CvReport:
    """Evaluate the full k x metric x weighting grid."""
    folds = _cv_folds(data)
    n_train = sum(len(f[1]) for f in folds)
    smallest_fold = n_train - max(len(f[1]) for f in folds)
    if k_candidates is None:
        ks = [k for k in default_k_grid(n_train) if k <= smallest_fold] or [1]
    else:
        ks = sorted({int(k) for k in k_candidates})
        if not ks:
            raise ConfigError("empty k candidate set")
        if ks[0] < 1:
            raise ConfigError("k candidates must be positive")
    schemes = [WeightScheme.parse(w) for w in weightings]
    rows = []
    for m in metrics:
        metric = DistanceMetric.parse(m)
        acc = _evaluate(folds, ks, metric, schemes)
        for k in ks:
            for s in schemes:
                rows.append(CvRow(k, metric.name, s.value, acc[(k, s)]))
    return CvReport(rows=tuple(rows), chosen=_pick(rows))


def select_k(data: LabeledDataset, k_candidates: Optional[Iterable[int]] = None,
             metric: DistanceMetric = DistanceMetric.euclidean(),
             weighting: WeightScheme = WeightScheme.INVERSE_SQUARED) -> Tuple[int, CvReport]:
    """Most accurate k (smallest on ties) for a fixed metric and weighting."""
    report = cross_validate(data, k_candidates, [metric], [weighting])
    return report.chosen[0], report
