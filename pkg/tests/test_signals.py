import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from myoprop.errors import ConfigError, DimensionError, InputError, ValidationError
from myoprop.signals import (
    Gesture,
    LabeledDataset,
    magnitude,
    normalize,
    normalize_many,
    rectify,
    smooth,
)

frames8 = arrays(np.float64, 8, elements=st.floats(0, 1e3, allow_nan=False))
positive_frames8 = arrays(np.float64, 8, elements=st.floats(1e-3, 1e3))


def test_rectify_absolute_value():
    out = rectify([-1, 2, -3, 4, -5, 6, -7, 8])
    np.testing.assert_array_equal(out, [1, 2, 3, 4, 5, 6, 7, 8])
    np.testing.assert_array_equal(rectify(np.zeros(8)), np.zeros(8))


def test_rectify_idempotent():
    r = np.random.default_rng(0).normal(size=8)
    np.testing.assert_array_equal(rectify(r), rectify(rectify(r)))


@pytest.mark.parametrize("bad", [np.zeros(7), np.zeros(9), np.zeros((3, 4))])
def test_rectify_wrong_channel_count(bad):
    with pytest.raises(DimensionError):
        rectify(bad)


def test_rectify_rejects_non_finite():
    with pytest.raises(InputError):
        rectify([0, 1, 2, np.nan, 4, 5, 6, 7])
    with pytest.raises(InputError):
        rectify([0, 1, 2, np.inf, 4, 5, 6, 7])


@pytest.mark.parametrize("frame, expected", [
    (np.ones(8), 1.0),
    (np.arange(1, 9), 4.5),
    (np.zeros(8), 0.0),
])
def test_magnitude(frame, expected):
    assert magnitude(frame) == expected


def test_magnitude_rejects_negative_channels():
    with pytest.raises(InputError):
        magnitude([-1, 0, 0, 0, 0, 0, 0, 0])


def test_normalize_constant_and_zero():
    nf = normalize(np.full(8, 2.0))
    np.testing.assert_array_equal(nf.direction, np.ones(8))
    assert nf.magnitude == 2.0
    nf = normalize(np.zeros(8))
    np.testing.assert_array_equal(nf.direction, np.zeros(8))
    assert nf.magnitude == 0.0


@given(positive_frames8)
def test_direction_has_unit_magnitude(f):
    assert magnitude(normalize(f).direction) == pytest.approx(1.0, abs=1e-9)


@given(positive_frames8)
def test_rescaling_direction_reproduces_frame(f):
    nf = normalize(f)
    np.testing.assert_allclose(nf.direction * nf.magnitude, f, rtol=0, atol=1e-9 * max(1.0, f.max()))


@given(frames8, st.floats(0, 1e3))
def test_magnitude_positively_homogeneous(f, c):
    assert magnitude(c * f) == pytest.approx(c * magnitude(f), rel=1e-9, abs=1e-300)


@given(positive_frames8, st.floats(1e-3, 1e3))
def test_direction_scale_invariant(f, c):
    np.testing.assert_allclose(normalize(c * f).direction, normalize(f).direction, atol=1e-9)


def test_normalize_many_matches_single():
    x = np.abs(np.random.default_rng(1).normal(size=(50, 8)))
    x[3] = 0
    dirs, mags = normalize_many(x)
    for row, d, m in zip(x, dirs, mags):
        nf = normalize(row)
        np.testing.assert_array_equal(d, nf.direction)
        assert m == nf.magnitude


def _moving_average_oracle(x, window):
    out = []
    for i in range(len(x)):
        lo = max(0, i - window + 1)
        acc = np.zeros(x.shape[1])
        for j in range(lo, i + 1):
            acc = acc + x[j]
        out.append(acc / (i + 1 - lo))
    return np.array(out)


def test_smooth_unit_window_identity():
    x = np.abs(np.random.default_rng(2).normal(size=(20, 8)))
    np.testing.assert_array_equal(smooth(x, 1), x)


def test_smooth_constant_stream():
    x = np.full((15, 8), 3.25)
    np.testing.assert_allclose(smooth(x, 4), x, rtol=0, atol=1e-12)


def test_smooth_impulse_matches_direct_summation():
    x = np.zeros((5, 8))
    x[2, 0] = 8.0
    out = smooth(x, 2)
    np.testing.assert_allclose(out, _moving_average_oracle(x, 2), atol=1e-12)
    # hand check of the impulse column
    np.testing.assert_allclose(out[:, 0], [0, 0, 4, 4, 0], atol=1e-12)


@pytest.mark.parametrize("window", [2, 3, 5, 11])
def test_smooth_random_matches_oracle(window):
    x = np.abs(np.random.default_rng(window).normal(size=(30, 8)))
    np.testing.assert_allclose(smooth(x, window), _moving_average_oracle(x, window), atol=1e-12)


def test_smooth_is_linear():
    rng = np.random.default_rng(3)
    a, b = np.abs(rng.normal(size=(2, 25, 8)))
    np.testing.assert_allclose(smooth(2 * a + 3 * b, 5), 2 * smooth(a, 5) + 3 * smooth(b, 5), atol=1e-12)


def test_smooth_length_and_bad_window():
    x = np.ones((7, 8))
    assert smooth(x, 3).shape == x.shape
    with pytest.raises(ConfigError):
        smooth(x, 0)


def test_gesture_parse():
    assert Gesture.parse("Power") is Gesture.POWER
    assert Gesture.parse(Gesture.REST) is Gesture.REST
    with pytest.raises(ValidationError):
        Gesture.parse("wave")


def _dataset(**kw):
    base = dict(frames=np.ones((4, 8)), labels=["rest", "power", "power", "rest"],
                levels=[0, 1, 1, 0], blocks=[0, 0, 1, 1])
    base.update(kw)
    return LabeledDataset(**base)


def test_dataset_valid():
    ds = _dataset()
    assert len(ds) == 4
    assert ds.rest_mask.tolist() == [True, False, False, True]


@pytest.mark.parametrize("kw", [
    dict(labels=["rest", "power", "power"]),
    dict(levels=[0, 1, 1.5, 0]),
    dict(levels=[0.2, 1, 1, 0]),
    dict(blocks=[0, 1, 0, 1]),
    dict(blocks=[0, 0, -1, -1]),
])
def test_dataset_invariants(kw):
    with pytest.raises(ValidationError):
        _dataset(**kw)


def test_dataset_rejects_bad_frames():
    with pytest.raises(DimensionError):
        _dataset(frames=np.ones((4, 7)))
    with pytest.raises(InputError):
        _dataset(frames=-np.ones((4, 8)))
