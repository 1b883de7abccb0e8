"""Deterministic synthetic 8-channel EMG sessions with ground-truth intent.

This is test scaffolding standing in for an armband and a subject, not a
physiological model. Each gesture has a fixed activation pattern over the
channel ring (a circular bump on a floor, scaled to mean 1). A gesture
frame at intensity ``a`` is::

    a * full_magnitude * pattern * (1 + e_rel) + rest_level * (1 + e_abs)

and a rest frame is ``rest_level * (1 + e_abs)``, both rectified, where
``e_rel ~ N(0, noise_rel)`` and ``e_abs ~ N(0, noise_abs)`` independently
per channel.

Noise for frame ``i`` comes from a Philox4x64-10 counter-based generator
keyed by the seed with ``i`` in the second counter word, so every frame is
a pure function of ``(seed, i)`` and the streams reproduce across
platforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .signals import (
    DEFAULT_FRAME_RATE_HZ,
    Gesture,
    LabeledDataset,
    N_CHANNELS,
    STUDY_GESTURES,
)

# Position of each gesture's activation peak on the channel ring.
_RING_CENTRES = {
    Gesture.POWER: 0.0,
    Gesture.POINT: 2.0,
    Gesture.FLEX: 4.0,
    Gesture.EXT: 6.0,
    Gesture.PRO: 1.0,
    Gesture.SUP: 5.0,
}
_PATTERN_FLOOR = 0.15


def ring_pattern(centre: float, width: float, floor: float = _PATTERN_FLOOR) -> np.ndarray:
    ch = np.arange(N_CHANNELS)
    delta = np.abs(ch - centre) % N_CHANNELS
    delta = np.minimum(delta, N_CHANNELS - delta)
    p = floor + np.exp(-0.5 * (delta / width) ** 2)
    return p / p.mean()


def default_prototypes(overlap: float = 0.5) -> Dict[str, np.ndarray]:
    """Patterns for all six non-rest gestures.

    ``overlap`` in [0, 1] widens the bumps; 0 gives nearly one-hot patterns
    and 1 makes neighbouring gestures share most of their activation.
    Power also co-activates the point channel.
    """
    if not 0 <= overlap <= 1:
        raise ConfigError(f"overlap must lie in [0, 1], got {overlap}")
    width = 0.35 + 0.9 * overlap
    protos = {}
    for g, c in _RING_CENTRES.items():
        p = ring_pattern(c, width)
        if g is Gesture.POWER:
            p = p + 0.5 * ring_pattern(_RING_CENTRES[Gesture.POINT], width)
            p = p / p.mean()
        protos[g.value] = p
    return protos


@dataclass(frozen=True)
class SynthConfig:
    prototypes: Dict[str, np.ndarray] = field(default_factory=default_prototypes)
    rest_level: float = 0.05
    full_magnitude: float = 1.0
    noise_rel: float = 0.1
    noise_abs: float = 0.3
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
    seed: int = 0

    def __post_init__(self):
        protos = {}
        for k, v in dict(self.prototypes).items():
            g = Gesture.parse(k)
            if g is Gesture.REST:
                raise ConfigError("rest has no prototype; it is set by rest_level")
            if g.value in protos:
                raise ConfigError(f"duplicate prototype for {g.value}")
            p = np.asarray(v, dtype=np.float64)
            if p.shape != (N_CHANNELS,) or np.any(p < 0) or not np.any(p > 0):
                raise ConfigError(f"prototype {g.value} must be 8 non-negative values, not all zero")
            p = p / p.mean()
            p.setflags(write=False)
            protos[g.value] = p
        object.__setattr__(self, "prototypes", protos)
        if not self.rest_level > 0:
            raise ConfigError("rest_level must be positive")
        if not self.full_magnitude > 0:
            raise ConfigError("full_magnitude must be positive")
        if self.noise_rel < 0 or self.noise_abs < 0:
            raise ConfigError("noise parameters must be non-negative")
        if not self.frame_rate_hz > 0:
            raise ConfigError("frame rate must be positive")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")

    def with_seed(self, seed: int) -> "SynthConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "prototypes": {k: v.tolist() for k, v in self.prototypes.items()},
            "rest_level": self.rest_level,
            "full_magnitude": self.full_magnitude,
            "noise_rel": self.noise_rel,
            "noise_abs": self.noise_abs,
            "frame_rate_hz": self.frame_rate_hz,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        overlap = d.pop("overlap", None)
        if "prototypes" not in d:
            d["prototypes"] = default_prototypes(0.5 if overlap is None else float(overlap))
        known = {"prototypes", "rest_level", "full_magnitude", "noise_rel",
                 "noise_abs", "frame_rate_hz", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)


def _noise(config: SynthConfig, index: int) -> Tuple[np.ndarray, np.ndarray]:
    bitgen = np.random.Philox(key=int(config.seed), counter=[0, int(index), 0, 0])
    z = np.random.Generator(bitgen).standard_normal(2 * N_CHANNELS)
    return z[:N_CHANNELS], z[N_CHANNELS:]


def generate_frame(label, intensity: float, config: SynthConfig, index: int = 0) -> np.ndarray:
    """One rectified frame; a pure function of ``(config, label, intensity, index)``."""
    g = Gesture.parse(label)
    if not 0 <= intensity <= 1:
        raise ConfigError(f"intensity must lie in [0, 1], got {intensity}")
    z_rel, z_abs = _noise(config, index)
    frame = config.rest_level * (1.0 + config.noise_abs * z_abs)
    if g is not Gesture.REST:
        if g.value not in config.prototypes:
            raise ConfigError(f"no prototype for gesture {g.value}")
        pattern = config.prototypes[g.value]
        frame = frame + intensity * config.full_magnitude * pattern * (1.0 + config.noise_rel * z_rel)
    return np.abs(frame)


def generate_frames(labels: Sequence, intensities: Sequence[float], config: SynthConfig,
                    start_index: int = 0) -> np.ndarray:
    return np.array([generate_frame(lab, a, config, start_index + i)
                     for i, (lab, a) in enumerate(zip(labels, intensities))]).reshape(-1, N_CHANNELS)


def expected_magnitude(label, intensity: float, config: SynthConfig) -> float:
    """Noiseless magnitude: ``intensity * full_magnitude + rest_level`` for gestures."""
    if Gesture.parse(label) is Gesture.REST:
        return config.rest_level
    return intensity * config.full_magnitude + config.rest_level


Script = Sequence[Tuple[str, float, float]]


def generate_session(script: Script, config: SynthConfig, repetitions: int = 1,
                     start_index: int = 0) -> LabeledDataset:
    """Render ``(label, intensity, duration_s)`` actions, repeated ``repetitions`` times.

    Each repetition of the script becomes one block. Rest actions are
    recorded with level 0 whatever intensity the script gives them.
    """
    if len(script) == 0:
        raise ConfigError("empty script")
    if int(repetitions) != repetitions or repetitions < 1:
        raise ConfigError(f"repetitions must be a positive integer, got {repetitions}")
    labels: List[str] = []
    levels: List[float] = []
    blocks: List[int] = []
    for rep in range(int(repetitions)):
        for action in script:
            label, intensity, duration = action
            g = Gesture.parse(label)
            if not duration > 0:
                raise ConfigError(f"action duration must be positive, got {duration}")
            n = int(round(duration * config.frame_rate_hz))
            if n < 1:
                raise ConfigError(f"action of {duration} s is shorter than one frame")
            level = 0.0 if g is Gesture.REST else float(intensity)
            labels += [g.value] * n
            levels += [level] * n
            blocks += [rep] * n
    frames = generate_frames(labels, levels, config, start_index)
    time_s = np.arange(len(labels)) / config.frame_rate_hz
    return LabeledDataset(frames=frames, labels=labels, levels=levels, blocks=blocks,
                          time_s=time_s, frame_rate_hz=config.frame_rate_hz)


def training_script(gestures: Sequence = STUDY_GESTURES, hold_s: float = 2.0,
                    rest_s: float = 1.0, intensity: float = 1.0) -> list:
    """Rest / gesture alternation covering each gesture once at full activation."""
    script = []
    for g in gestures:
        script.append((Gesture.REST.value, 0.0, rest_s))
        script.append((Gesture.parse(g).value, intensity, hold_s))
    script.append((Gesture.REST.value, 0.0, rest_s))
    return script


def trial_intensity_profile(level: float, n_frames: int, frame_rate_hz: float,
                            lead_s: float = 0.5, ramp_s: float = 0.5) -> np.ndarray:
    """Ground-truth intent over one trial: rest, linear ramp, then hold at ``level``."""
    t = np.arange(n_frames) / frame_rate_hz
    ramp = np.clip((t - lead_s) / ramp_s, 0.0, 1.0) if ramp_s > 0 else (t >= lead_s).astype(float)
    prof = level * ramp
    prof[t < lead_s] = 0.0
    return prof


def generate_trials(config: SynthConfig, gestures: Sequence = STUDY_GESTURES,
                    levels: Sequence[float] = (0.33, 0.67, 1.0), repeats: int = 2,
                    duration_s: float = 4.0, lead_s: float = 0.5, ramp_s: float = 0.5,
                    start_index: int = 1_000_000) -> LabeledDataset:
    """A recording with one block per goal-directed trial.

    Within each block the subject rests for ``lead_s``, ramps to the goal
    level over ``ramp_s`` and holds it. Frame indices start at
    ``start_index`` so trial noise never coincides with a training session
    generated from the same seed.
    """
    n = int(round(duration_s * config.frame_rate_hz))
    if n < 1:
        raise ConfigError("trial duration shorter than one frame")
    parts = []
    trial_id = 0
    cursor = start_index
    for _ in range(int(repeats)):
        for g in gestures:
            g = Gesture.parse(g)
            for level in levels:
                if not 0 < level <= 1:
                    raise ConfigError(f"trial level must lie in (0, 1], got {level}")
                prof = trial_intensity_profile(level, n, config.frame_rate_hz, lead_s, ramp_s)
                labels = np.where(prof > 0, g.value, Gesture.REST.value)
                frames = generate_frames(labels, prof, config, cursor)
                cursor += n
                parts.append(LabeledDataset(
                    frames=frames, labels=labels, levels=prof, blocks=np.full(n, trial_id),
                    time_s=np.arange(n) / config.frame_rate_hz, frame_rate_hz=config.frame_rate_hz))
                trial_id += 1
    return LabeledDataset.concatenate(parts)


def magnitude_standard_error(config: SynthConfig, label, intensity: float) -> float:
    """Standard deviation of a single frame's magnitude before rectification."""
    var = (config.rest_level * config.noise_abs) ** 2 * N_CHANNELS
    g = Gesture.parse(label)
    if g is not Gesture.REST:
        p = config.prototypes[g.value]
        var += float(np.sum((intensity * config.full_magnitude * p * config.noise_rel) ** 2))
    return math.sqrt(var) / N_CHANNELS


__all__ = [
    "SynthConfig", "default_prototypes", "ring_pattern", "generate_frame", "generate_frames",
    "generate_session", "generate_trials", "training_script", "expected_magnitude",
    "trial_intensity_profile", "magnitude_standard_error",
]
