"""Proportional kNN myocontrol with rest thresholding, plus an RR-RFF baseline."""

__version__ = "0.1.0"

from .signals import Gesture, LabeledDataset, magnitude, normalize, rectify, smooth
from .knn import DistanceMetric, KnnConfig, TrainingSet, WeightScheme, classify
from .proportional import KnnModel, Prediction, predict, train
from .rrrff import RrRffModel, fit_rrrff, predict_rrrff
from .stats import anova_oneway, f_cdf

__all__ = [
    "Gesture", "LabeledDataset", "magnitude", "normalize", "rectify", "smooth",
    "DistanceMetric", "KnnConfig", "TrainingSet", "WeightScheme", "classify",
    "KnnModel", "Prediction", "predict", "train",
    "RrRffModel", "fit_rrrff", "predict_rrrff",
    "anova_oneway", "f_cdf",
]
