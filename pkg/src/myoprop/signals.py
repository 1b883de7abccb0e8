"""Signal representation and the magnitude/direction decomposition.

A frame is one time step of rectified 8-channel EMG, held as a float64
array of shape ``(8,)``; a stream of frames is an array of shape ``(n, 8)``.
The magnitude of a frame is the arithmetic mean of its channels and the
direction is the frame divided by that magnitude, so a direction always
has mean 1 (or is all-zero for a zero frame).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, InputError, ValidationError

N_CHANNELS = 8

# Envelope horizon of 100 ms at the default 50 Hz frame rate.
DEFAULT_SMOOTH_WINDOW = 5
DEFAULT_FRAME_RATE_HZ = 50.0


class Gesture(str, Enum):
    REST = "rest"
    POWER = "power"
    POINT = "point"
    FLEX = "flex"
    EXT = "ext"
    PRO = "pro"
    SUP = "sup"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, value) -> "Gesture":
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"unknown gesture label {value!r}") from None


GESTURE_ORDER = tuple(Gesture)
ACTIVE_GESTURES = tuple(g for g in Gesture if g is not Gesture.REST)
STUDY_GESTURES = (Gesture.POWER, Gesture.POINT, Gesture.FLEX, Gesture.EXT)


class NormalizedFrame(NamedTuple):
    direction: np.ndarray
    magnitude: float


def _as_channels(values, what="frame") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape[-1:] != (N_CHANNELS,):
        raise DimensionError(
            f"{what} must have {N_CHANNELS} channels, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what} contains non-finite values")
    return arr


def as_frame(values) -> np.ndarray:
    """Validate an already-rectified frame (or stack of frames)."""
    arr = _as_channels(values)
    if np.any(arr < 0):
        raise InputError("rectified frame has negative channel values")
    return arr


def rectify(raw) -> np.ndarray:
    """Element-wise absolute value of a raw reading.

    Accepts a single reading of shape ``(8,)`` or a stream ``(n, 8)``.
    """
    return np.abs(_as_channels(raw, "raw reading"))


def magnitude(frame):
    """Mean channel activation. Vectorised over leading axes."""
    arr = as_frame(frame)
    m = arr.mean(axis=-1)
    return float(m) if arr.ndim == 1 else m


def normalize(frame) -> NormalizedFrame:
    """Split a frame into its direction and magnitude.

    A zero frame gives an all-zero direction and magnitude 0; callers treat
    that as rest.
    """
    arr = as_frame(frame)
    if arr.ndim != 1:
        raise DimensionError("normalize takes a single frame; use normalize_many")
    m = float(arr.mean())
    if m == 0.0:
        return NormalizedFrame(np.zeros(N_CHANNELS), 0.0)
    return NormalizedFrame(arr / m, m)


def normalize_many(frames):
    """Vectorised :func:`normalize` returning ``(directions, magnitudes)``."""
    arr = as_frame(np.atleast_2d(frames))
    mags = arr.mean(axis=1)
    directions = np.zeros_like(arr)
    nz = mags > 0
    directions[nz] = arr[nz] / mags[nz, None]
    return directions, mags


def smooth(stream, window: int = DEFAULT_SMOOTH_WINDOW) -> np.ndarray:
    """Causal moving average over the last ``window`` frames, per channel.

    The first ``window - 1`` outputs average over the frames available so far.
    """
    if int(window) != window or window < 1:
        raise ConfigError(f"smoothing window must be a positive integer, got {window}")
    window = int(window)
    arr = as_frame(np.atleast_2d(stream)) if len(stream) else np.zeros((0, N_CHANNELS))
    if window == 1 or len(arr) == 0:
        return arr.copy()
    csum = np.cumsum(np.vstack([np.zeros((1, N_CHANNELS)), arr]), axis=0)
    n = len(arr)
    hi = np.arange(1, n + 1)
    lo = np.maximum(hi - window, 0)
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


@dataclass
class LabeledDataset:
    """Frames with per-frame gesture labels, stimulus levels and block ids.

    ``blocks`` may be ``None`` when the recording carries no repetition
    structure; cross-validation then falls back to equal contiguous splits.
    """

    frames: np.ndarray
    labels: np.ndarray
    levels: np.ndarray
    blocks: Optional[np.ndarray] = None
    time_s: Optional[np.ndarray] = None
    frame_rate_hz: float = field(default=DEFAULT_FRAME_RATE_HZ)

    def __post_init__(self):
        self.frames = as_frame(np.atleast_2d(np.asarray(self.frames, dtype=np.float64)))
        n = len(self.frames)
        self.labels = np.asarray([Gesture.parse(v).value for v in self.labels], dtype="<U5")
        self.levels = np.asarray(self.levels, dtype=np.float64)
        if len(self.labels) != n or len(self.levels) != n:
            raise ValidationError("frames, labels and levels must have equal length")
        if not np.all(np.isfinite(self.levels)) or np.any((self.levels < 0) | (self.levels > 1)):
            raise ValidationError("levels must lie in [0, 1]")
        if np.any(self.levels[self.labels == Gesture.REST.value] != 0):
            raise ValidationError("rest frames must have level 0")
        if self.blocks is not None:
            self.blocks = np.asarray(self.blocks)
            if len(self.blocks) != n:
                raise ValidationError("blocks must have one id per frame")
            if self.blocks.dtype.kind not in "iu" or np.any(self.blocks < 0):
                raise ValidationError("block ids must be non-negative integers")
            self.blocks = self.blocks.astype(np.int64)
            check_contiguous_blocks(self.blocks)
        if self.time_s is not None:
            self.time_s = np.asarray(self.time_s, dtype=np.float64)
            if len(self.time_s) != n:
                raise ValidationError("time_s must have one entry per frame")

    def __len__(self):
        return len(self.frames)

    @property
    def rest_mask(self) -> np.ndarray:
        return self.labels == Gesture.REST.value

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index)
        return LabeledDataset(
            frames=self.frames[index],
            labels=self.labels[index],
            levels=self.levels[index],
            blocks=None if self.blocks is None else self.blocks[index],
            time_s=None if self.time_s is None else self.time_s[index],
            frame_rate_hz=self.frame_rate_hz,
        )

    @classmethod
    def concatenate(cls, parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        has_blocks = all(p.blocks is not None for p in parts)
        has_time = all(p.time_s is not None for p in parts)
        return cls(
            frames=np.vstack([p.frames for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            levels=np.concatenate([p.levels for p in parts]),
            blocks=np.concatenate([p.blocks for p in parts]) if has_blocks else None,
            time_s=np.concatenate([p.time_s for p in parts]) if has_time else None,
            frame_rate_hz=parts[0].frame_rate_hz,
        )


def check_contiguous_blocks(blocks) -> None:
    """Raise ValidationError if any block id reappears after another id."""
    blocks = np.asarray(blocks)
    if len(blocks) == 0:
        return
    starts = np.concatenate([[True], blocks[1:] != blocks[:-1]])
    run_ids = blocks[starts]
    if len(np.unique(run_ids)) != len(run_ids):
        seen = set()
        for i in np.flatnonzero(starts):
            b = int(blocks[i])
            if b in seen:
                raise ValidationError(
                    f"block id {b} is not contiguous (reappears at frame {i})")
            seen.add(b)
