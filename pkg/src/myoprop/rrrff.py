"""Ridge regression on random Fourier features, the proportional baseline.

Random features approximate the Gaussian kernel ``exp(-gamma * |x - y|^2)``.
The regressor maps unnormalised (smoothed) envelopes to one activation per
gesture, so amplitude carries the proportional information directly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import ConfigError, NumericError, TrainingError
from .proportional import REST_PREDICTION, Prediction
from .signals import (
    ACTIVE_GESTURES,
    DEFAULT_SMOOTH_WINDOW,
    Gesture,
    LabeledDataset,
    N_CHANNELS,
    as_frame,
    smooth,
)

DEFAULT_N_FEATURES = 300
DEFAULT_RIDGE = 1.0
DEFAULT_REST_ACTIVATION = 0.15
MEDIAN_PAIRS = 1000


@dataclass(frozen=True)
class RffMap:
    omega: np.ndarray
    beta: np.ndarray
    gamma: float
    seed: int

    @property
    def D(self) -> int:
        return len(self.beta)


def sample_rff(D: int, gamma: float, seed: int = 0) -> RffMap:
    """Frequencies ~ N(0, 2*gamma*I), phases ~ U[0, 2*pi)."""
    if int(D) != D or D < 1:
        raise ConfigError(f"D must be a positive integer, got {D}")
    if not (np.isfinite(gamma) and gamma > 0):
        raise ConfigError(f"gamma must be positive, got {gamma}")
    rng = np.random.default_rng(seed)
    omega = rng.normal(0.0, np.sqrt(2.0 * gamma), size=(int(D), N_CHANNELS))
    beta = rng.uniform(0.0, 2.0 * np.pi, size=int(D))
    omega.setflags(write=False)
    beta.setflags(write=False)
    return RffMap(omega=omega, beta=beta, gamma=float(gamma), seed=int(seed))


def rff_features(x, rff: RffMap) -> np.ndarray:
    """``sqrt(2/D) * cos(omega @ x + beta)``; rows map to rows for 2-D input."""
    x = np.asarray(x, dtype=np.float64)
    # einsum rather than BLAS: a row's result must not depend on batch size
    return np.sqrt(2.0 / rff.D) * np.cos(np.einsum("...j,dj->...d", x, rff.omega) + rff.beta)


def median_heuristic(x, seed: int = 0, n_pairs: int = MEDIAN_PAIRS) -> float:
    """``1 / (2 * median^2)`` of distances between randomly drawn pairs."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise TrainingError("median heuristic needs at least two frames")
    rng = np.random.default_rng([int(seed), 1])
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n - 1, size=n_pairs)
    j = j + (j >= i)  # distinct partner
    med = float(np.median(np.linalg.norm(x[i] - x[j], axis=1)))
    if not med > 0:
        raise TrainingError("median pairwise distance is zero; cannot set bandwidth")
    return 1.0 / (2.0 * med * med)


def ridge_solve(Z: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(Z^T Z + lam I) W = Z^T Y``.

    Uses the primal Cholesky system when there are more samples than
    features and the equivalent dual form ``W = Z^T (Z Z^T + lam I)^-1 Y``
    otherwise, which stays well conditioned in the interpolation regime.
    """
    n, D = Z.shape
    if D <= n:
        A = Z.T @ Z
        A[np.diag_indices_from(A)] += lam
        rhs = Z.T @ Y
        try:
            return linalg.cho_solve(linalg.cho_factor(A, lower=True), rhs)
        except linalg.LinAlgError:
            raise NumericError("ridge system is not positive definite") from None
    K = Z @ Z.T
    K[np.diag_indices_from(K)] += lam
    try:
        alpha = linalg.cho_solve(linalg.cho_factor(K, lower=True), Y)
    except linalg.LinAlgError:
        raise NumericError("dual ridge system is not positive definite") from None
    return Z.T @ alpha


def normal_equation_residual(Z, Y, W, lam) -> float:
    """``max |(Z^T Z + lam I) W - Z^T Y|``."""
    return float(np.max(np.abs(Z.T @ (Z @ W) + lam * W - Z.T @ Y)))


def regression_targets(data: LabeledDataset, gesture_order: Sequence[Gesture]) -> np.ndarray:
    """One column per gesture holding the stimulus level; rest rows are zero."""
    Y = np.zeros((len(data), len(gesture_order)))
    for col, g in enumerate(gesture_order):
        sel = data.labels == g.value
        Y[sel, col] = data.levels[sel]
    return Y


@dataclass(frozen=True)
class RrRffModel:
    rff: RffMap
    weights: np.ndarray
    lam: float
    rho: float
    gesture_order: Tuple[Gesture, ...]
    smooth_window: int = DEFAULT_SMOOTH_WINDOW

    def __post_init__(self):
        # fixed memory layout keeps the summation order, hence the bits, reproducible
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if len(set(self.gesture_order)) != len(self.gesture_order):
            raise ConfigError("gesture order has duplicates")
        if self.weights.shape != (self.rff.D, len(self.gesture_order)):
            raise ConfigError("weight matrix shape does not match map and gestures")
        if not np.all(np.isfinite(self.weights)):
            raise NumericError("ridge weights are not finite")

    def activations(self, frames) -> np.ndarray:
        z = rff_features(as_frame(frames), self.rff)
        return np.einsum("...d,dg->...g", z, self.weights)

    def __call__(self, frame) -> Prediction:
        return predict_rrrff(frame, self)

    def predict_many(self, frames) -> list:
        acts = np.atleast_2d(self.activations(np.atleast_2d(frames)))
        return [_decide(a, self) for a in acts]


def fit_rrrff(data: LabeledDataset, D: int = DEFAULT_N_FEATURES,
              gamma: Union[float, str] = "median-heuristic", lam: float = DEFAULT_RIDGE,
              rho: float = DEFAULT_REST_ACTIVATION, seed: int = 0,
              smooth_window: int = DEFAULT_SMOOTH_WINDOW,
              gesture_order: Optional[Sequence] = None) -> RrRffModel:
    """Fit ridge weights on random features of smoothed, unnormalised frames."""
    if not lam > 0:
        raise ConfigError(f"ridge parameter must be positive, got {lam}")
    if not 0 < rho < 1:
        raise ConfigError(f"rest activation threshold must lie in (0, 1), got {rho}")
    if gesture_order is None:
        present = set(data.labels.tolist())
        gesture_order = [g for g in ACTIVE_GESTURES if g.value in present]
    gesture_order = tuple(Gesture.parse(g) for g in gesture_order)
    if not gesture_order or Gesture.REST in gesture_order:
        raise TrainingError("need at least one non-rest gesture class")
    x = smooth(data.frames, smooth_window)
    if not np.any(x):
        raise TrainingError("all training frames are zero")
    if isinstance(gamma, str):
        if gamma not in ("median", "median-heuristic"):
            raise ConfigError(f"unknown gamma rule {gamma!r}")
        gamma = median_heuristic(x, seed)
    rff = sample_rff(D, float(gamma), seed)
    Z = rff_features(x, rff)
    Y = regression_targets(data, gesture_order)
    W = ridge_solve(Z, Y, float(lam))
    return RrRffModel(rff=rff, weights=W, lam=float(lam), rho=float(rho),
                      gesture_order=gesture_order, smooth_window=int(smooth_window))


def _decide(a: np.ndarray, model: RrRffModel) -> Prediction:
    best = int(np.argmax(a))
    top = float(a[best])
    if top < model.rho:
        return REST_PREDICTION
    return Prediction(model.gesture_order[best], min(max(top, 0.0), 1.0))


def predict_rrrff(frame, model: RrRffModel) -> Prediction:
    """Strongest gesture activation, or rest below the activation threshold."""
    return _decide(model.activations(frame), model)
