"""Goal-directed trial replay, success rates and head-to-head comparison.

A trial succeeds when the predictor holds the target gesture with a
proportion within ``tolerance`` of the goal level for ``dwell_s`` seconds
of consecutive frames, finishing no later than ``timeout_s``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ReportError, ValidationError
from .proportional import Prediction
from .signals import DEFAULT_FRAME_RATE_HZ, DEFAULT_SMOOTH_WINDOW, Gesture, LabeledDataset, smooth

STUDY_LEVELS = (0.33, 0.67, 1.0)

Predictor = Callable[[np.ndarray], Prediction]


@dataclass(frozen=True)
class Protocol:
    tolerance: float = 0.15
    dwell_s: float = 0.5
    timeout_s: float = 10.0
    smooth_window: int = DEFAULT_SMOOTH_WINDOW
    levels: Tuple[float, ...] = STUDY_LEVELS

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        _check_windows(self.tolerance, self.dwell_s, self.timeout_s)
        if int(self.smooth_window) != self.smooth_window or self.smooth_window < 1:
            raise ConfigError("smooth_window must be a positive integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["levels"] = list(self.levels)
        return d


def _check_windows(tolerance, dwell_s, timeout_s):
    if not tolerance > 0:
        raise ConfigError(f"tolerance must be positive, got {tolerance}")
    if not dwell_s > 0:
        raise ConfigError(f"dwell must be positive, got {dwell_s}")
    if not timeout_s >= dwell_s:
        raise ConfigError(f"timeout ({timeout_s}) must be at least the dwell ({dwell_s})")


@dataclass(frozen=True)
class Trial:
    target: Gesture
    level: float
    stream: np.ndarray
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
    trial_id: int = 0
    subject: int = 0

    def __post_init__(self):
        object.__setattr__(self, "target", Gesture.parse(self.target))
        if self.target is Gesture.REST:
            raise ValidationError("a trial target cannot be rest")
        if not 0 < self.level <= 1:
            raise ValidationError(f"trial level must lie in (0, 1], got {self.level}")
        if len(self.stream) == 0:
            raise ValidationError("trial stream is empty")
        if not self.frame_rate_hz > 0:
            raise ValidationError("frame rate must be positive")


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    time_to_success_s: Optional[float]
    trace: Tuple[Prediction, ...]


def dwell_frames(dwell_s: float, frame_rate_hz: float) -> int:
    # guard against 0.5 * 50 landing a hair above an integer
    return max(1, math.ceil(dwell_s * frame_rate_hz - 1e-9))


def score_trace(trace: Sequence[Prediction], target, level: float, frame_rate_hz: float,
                tolerance: float = 0.15, dwell_s: float = 0.5,
                timeout_s: float = 10.0) -> Tuple[bool, Optional[float]]:
    """Scan a prediction trace for the first qualifying hold."""
    _check_windows(tolerance, dwell_s, timeout_s)
    target = Gesture.parse(target)
    need = dwell_frames(dwell_s, frame_rate_hz)
    run = 0
    for i, (label, proportion) in enumerate(trace):
        end_time = (i + 1) / frame_rate_hz
        if end_time > timeout_s + 1e-9:
            break
        if label == target and abs(proportion - level) <= tolerance:
            run += 1
            if run >= need:
                return True, end_time
        else:
            run = 0
    return False, None


def predict_stream(predictor: Predictor, stream) -> List[Prediction]:
    batch = getattr(predictor, "predict_many", None)
    if batch is not None:
        return list(batch(stream))
    return [predictor(f) for f in stream]


def run_trial(predictor: Predictor, trial: Trial, tolerance: float = 0.15,
              dwell_s: float = 0.5, timeout_s: float = 10.0) -> TrialOutcome:
    _check_windows(tolerance, dwell_s, timeout_s)
    trace = tuple(predict_stream(predictor, trial.stream))
    ok, when = score_trace(trace, trial.target, trial.level, trial.frame_rate_hz,
                           tolerance, dwell_s, timeout_s)
    return TrialOutcome(ok, when, trace)


def success_rate(outcomes: Sequence[TrialOutcome]) -> float:
    if len(outcomes) == 0:
        raise ReportError("no trial outcomes to aggregate")
    return sum(1 for o in outcomes if o.success) / len(outcomes)


@dataclass(frozen=True)
class SrReport:
    algorithm: str
    per_level: Dict[float, float]
    overall: float
    n_trials: Dict[float, int] = field(default_factory=dict)
    successes: Dict[float, int] = field(default_factory=dict)

    def to_rows(self) -> List[dict]:
        rows = [dict(algorithm=self.algorithm, level=f"{lv:g}", n_trials=self.n_trials[lv],
                     successes=self.successes[lv], success_rate=self.per_level[lv])
                for lv in sorted(self.per_level)]
        total = sum(self.n_trials.values())
        rows.append(dict(algorithm=self.algorithm, level="all", n_trials=total,
                         successes=sum(self.successes.values()), success_rate=self.overall))
        return rows


@dataclass(frozen=True)
class TrialRecord:
    algorithm: str
    level: float
    trial_id: int
    success: bool
    time_to_success_s: Optional[float]
    target: str = ""
    subject: int = 0


def sr_report(algorithm: str, trials: Sequence[Trial], outcomes: Sequence[TrialOutcome],
              levels: Sequence[float] = STUDY_LEVELS) -> SrReport:
    if len(outcomes) == 0:
        raise ReportError("no trial outcomes to aggregate")
    keys = sorted(set(float(v) for v in levels) | {float(t.level) for t in trials})
    n = {lv: 0 for lv in keys}
    s = {lv: 0 for lv in keys}
    for t, o in zip(trials, outcomes):
        n[float(t.level)] += 1
        s[float(t.level)] += int(o.success)
    per_level = {lv: (s[lv] / n[lv] if n[lv] else float("nan")) for lv in keys}
    return SrReport(algorithm, per_level, success_rate(outcomes), n, s)


def evaluate(algorithm: str, predictor: Predictor, trials: Sequence[Trial],
             protocol: Protocol = Protocol()) -> Tuple[SrReport, List[TrialRecord]]:
    """Run every trial through one predictor, aggregating in trial order."""
    outcomes = []
    for t in trials:
        stream = smooth(t.stream, protocol.smooth_window)
        outcomes.append(run_trial(predictor, Trial(t.target, t.level, stream, t.frame_rate_hz,
                                                   t.trial_id, t.subject),
                                  protocol.tolerance, protocol.dwell_s, protocol.timeout_s))
    records = [TrialRecord(algorithm, t.level, t.trial_id, o.success, o.time_to_success_s,
                           t.target.value, t.subject)
               for t, o in zip(trials, outcomes)]
    return sr_report(algorithm, trials, outcomes, protocol.levels), records


def presentation_order(n_trials: int, seed: int) -> List[int]:
    """Randomised trial order; recorded in reports, it does not change any outcome."""
    return np.random.default_rng(seed).permutation(n_trials).tolist()


def compare_predictors(predictors: Mapping[str, Predictor], trials: Sequence[Trial],
                       protocol: Protocol = Protocol(), seed: int = 0):
    """Replay identical trials through each predictor.

    Returns ``(reports, records, order)``: an SrReport per algorithm, the
    per-trial records sorted by algorithm then trial id, and the
    presentation order drawn from ``seed``.
    """
    trials = sorted(trials, key=lambda t: t.trial_id)
    order = presentation_order(len(trials), seed)
    presented = [trials[i] for i in order]
    reports, records = {}, []
    for name, predictor in predictors.items():
        rep, recs = evaluate(name, predictor, presented, protocol)
        reports[name] = rep
        records.extend(sorted(recs, key=lambda r: r.trial_id))
    return reports, records, order


def compare(train_data: LabeledDataset, trials: Sequence[Trial], knn_params: Optional[dict] = None,
            rrrff_params: Optional[dict] = None, protocol: Protocol = Protocol(), seed: int = 0):
    """Train both pipelines on the same data and replay the same trials.

    Returns ``(knn_report, rrrff_report, records, models, order)``.
    """
    from .proportional import train
    from .rrrff import fit_rrrff

    knn_model = train(train_data, **(knn_params or {}))
    rr_params = dict(rrrff_params or {})
    rr_params.setdefault("seed", seed)
    rr_model = fit_rrrff(train_data, **rr_params)
    reports, records, order = compare_predictors(
        {"knn": knn_model, "rrrff": rr_model}, trials, protocol, seed)
    return reports["knn"], reports["rrrff"], records, (knn_model, rr_model), order


def trials_from_recording(data: LabeledDataset) -> List[Trial]:
    """Split a trial recording into trials, one per block.

    A block's target is its single non-rest label and its goal level is the
    highest level recorded in the block.
    """
    if data.blocks is None:
        raise ValidationError("a trial recording needs block ids (one block per trial)")
    from .selection import make_blocks

    trials = []
    for idx in make_blocks(data) if len(np.unique(data.blocks)) > 1 else [np.arange(len(data))]:
        labels = set(data.labels[idx].tolist()) - {Gesture.REST.value}
        tid = int(data.blocks[idx[0]])
        if len(labels) != 1:
            raise ValidationError(f"trial block {tid} must contain exactly one target gesture")
        trials.append(Trial(labels.pop(), float(data.levels[idx].max()), data.frames[idx],
                            data.frame_rate_hz, tid))
    return trials


def anova_groups(records: Sequence[TrialRecord], by: str = "algorithm") -> Dict[str, List[float]]:
    """Per-trial success (0/1) grouped for ANOVA."""
    groups: Dict[str, List[float]] = {}
    for r in records:
        groups.setdefault(str(getattr(r, by)), []).append(float(r.success))
    return groups


def subject_table(records: Sequence[TrialRecord]) -> List[dict]:
    """Success rate per (algorithm, subject, level), for subject-level ANOVA."""
    cells: Dict[tuple, List[bool]] = {}
    for r in records:
        cells.setdefault((r.algorithm, r.subject, r.level), []).append(r.success)
    return [dict(algorithm=a, subject=s, level=lv, success_rate=sum(v) / len(v))
            for (a, s, lv), v in sorted(cells.items())]
