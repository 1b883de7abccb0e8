import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from myoprop.errors import ConfigError, TrainingError
from myoprop.knn import KnnConfig
from myoprop.proportional import (
    DegenerateClassWarning,
    KnnModel,
    Prediction,
    ProportionalMap,
    RestThreshold,
    fit_class_means,
    fit_rest_threshold,
    is_rest,
    predict,
    proportional_value,
    train,
)
from myoprop.signals import Gesture, LabeledDataset, magnitude
from myoprop.synth import (
    SynthConfig,
    expected_magnitude,
    generate_session,
    magnitude_standard_error,
)

import oracles


def pmap(m0, means, d=5.0):
    return ProportionalMap(d=d, m0=m0, class_means=means)


def test_fit_rest_threshold_examples():
    rest = fit_rest_threshold([1, 2, 3], 2.5)
    assert (rest.t0, rest.t) == (2.0, 5.0)
    rest = fit_rest_threshold([0, 0, 0], 2.5)
    assert (rest.t0, rest.t) == (0.0, 0.0)
    rest = fit_rest_threshold([0.3, 0.7], 1.0)
    assert rest.t == rest.t0
    with pytest.raises(TrainingError):
        fit_rest_threshold([], 2.5)
    with pytest.raises(ConfigError):
        fit_rest_threshold([1.0], 0.0)


def test_is_rest_boundary():
    rest = RestThreshold(t0=2.0, g=2.5)
    assert is_rest(5.0, rest)
    assert not is_rest(5.000001, rest)
    assert is_rest(0.0, rest)
    assert is_rest(0.0, RestThreshold(0.0, 2.5))


def test_fit_class_means_examples():
    frames = np.vstack([np.full(8, 4.0), np.full(8, 6.0), np.full(8, 3.0), np.full(8, 0.1)])
    ds = LabeledDataset(frames, ["power", "power", "point", "rest"], [1, 0.5, 1, 0])
    assert fit_class_means(ds) == {"power": 5.0, "point": 3.0}
    with pytest.raises(TrainingError):
        fit_class_means(ds, ["flex"])


def test_class_mean_matches_generator_expectation():
    cfg = SynthConfig(seed=3)
    ds = generate_session([("power", 1.0, 40.0), ("rest", 0.0, 1.0)], cfg)
    n = int(np.sum(ds.labels == "power"))
    mc = fit_class_means(ds)["power"]
    se = magnitude_standard_error(cfg, "power", 1.0) / math.sqrt(n)
    assert abs(mc - expected_magnitude("power", 1.0, cfg)) <= 3 * se


def test_proportional_value_examples():
    assert proportional_value(5.0, "power", pmap(1.0, {"power": 9.0})) == 0.5
    assert proportional_value(9.0, "power", pmap(1.0, {"power": 9.0})) == 1.0
    assert proportional_value(50.0, "power", pmap(1.0, {"power": 9.0})) == 1.0


def test_proportional_value_study_defaults():
    rest = RestThreshold(t0=2.0, g=2.5)
    prop = ProportionalMap.from_threshold(rest, 5.0, {"power": 9.0})
    assert (rest.t, prop.m0) == (5.0, 1.0)
    just_active = math.nextafter(5.0, math.inf)
    assert not is_rest(just_active, rest)
    assert proportional_value(just_active, "power", prop) == pytest.approx(0.5, abs=1e-12)


def test_proportional_value_degenerate_class_warns():
    prop = pmap(2.0, {"power": 1.5})
    with pytest.warns(DegenerateClassWarning):
        assert proportional_value(3.0, "power", prop) == 1.0


def test_proportional_value_unknown_label():
    with pytest.raises(KeyError):
        proportional_value(3.0, "flex", pmap(1.0, {"power": 9.0}))


@given(st.floats(0, 20), st.floats(0, 20))
def test_proportional_value_monotone_in_m(a, b):
    prop = pmap(1.0, {"power": 9.0})
    lo, hi = sorted((a, b))
    assert proportional_value(lo, "power", prop) <= proportional_value(hi, "power", prop)
    assert 0.0 <= proportional_value(a, "power", prop) <= 1.0


def test_proportional_value_strictly_increasing_in_d():
    rest = RestThreshold(t0=2.0, g=2.5)
    mc = 9.0
    for m in np.linspace(5.01, 8.99, 50):
        ps = [proportional_value(m, "power", ProportionalMap.from_threshold(rest, d, {"power": mc}))
              for d in (1, 1.5, 2, 3, 5, 8, 10)]
        assert all(a < b for a, b in zip(ps, ps[1:]))


def test_map_invariants():
    rest = RestThreshold(t0=0.4, g=2.5)
    prop = ProportionalMap.from_threshold(rest, 5.0, {"power": 1.0})
    assert abs(prop.m0 - rest.t / 5.0) <= 1e-12
    assert abs(rest.t - 2.5 * 0.4) <= 1e-12
    with pytest.raises(ConfigError):
        ProportionalMap.from_threshold(rest, 0.5, {"power": 1.0})
    with pytest.raises(TrainingError):
        ProportionalMap(d=5, m0=0.1, class_means={"power": 0.0})


def tiny_dataset():
    frames = np.vstack([np.full(8, 0.1), np.full(8, 0.12),
                        np.r_[np.full(4, 2.0), np.full(4, 0.2)],
                        np.r_[np.full(4, 0.2), np.full(4, 2.0)]])
    return LabeledDataset(frames, ["rest", "rest", "power", "point"], [0, 0, 1, 1])


def test_train_defaults_follow_study_configuration():
    model = train(tiny_dataset())
    assert model.rest.g == 2.5
    assert model.prop.d == 5.0
    assert model.config == KnnConfig(1, "euclidean", "inverse_squared")
    assert model.rest.t0 == pytest.approx(0.11)
    assert model.prop.m0 == pytest.approx(2.5 * 0.11 / 5)
    assert model.prop.class_means == {"power": 1.1, "point": 1.1}


def test_train_singleton_model():
    ds = LabeledDataset(np.vstack([np.full(8, 0.1), np.arange(1.0, 9.0)]), ["rest", "flex"], [0, 1])
    model = train(ds)
    assert len(model.train) == 1
    assert model.prop.class_means == {"flex": 4.5}
    assert predict(np.arange(1.0, 9.0), model) == Prediction(Gesture.FLEX, 1.0)


def test_train_errors():
    ds = tiny_dataset()
    with pytest.raises(TrainingError):
        train(ds.subset([2, 3]))
    with pytest.raises(TrainingError):
        train(ds.subset([0, 1]))
    with pytest.raises(ConfigError):
        train(ds, d=0.5)
    with pytest.raises(ConfigError):
        train(ds, config=KnnConfig(k=3))


def test_predict_zero_frame_and_rest():
    model = train(tiny_dataset())
    assert predict(np.zeros(8), model) == Prediction(Gesture.REST, 0.0)
    assert predict(np.full(8, 0.2), model) == Prediction(Gesture.REST, 0.0)


def test_predict_full_intensity_reproduction(study_training):
    model = train(study_training)
    idx = int(np.flatnonzero(study_training.labels == "power")[5])
    f = study_training.frames[idx]
    scaled = f * model.prop.class_means["power"] / magnitude(f)
    label, p = predict(scaled, model)
    assert label is Gesture.POWER
    assert p == pytest.approx(1.0, abs=1e-12)


def test_predict_matches_generator_ground_truth(study_config, study_training):
    model = train(study_training)
    replay = generate_session([(g, 1.0, 2.0) for g in ("power", "point", "flex", "ext")]
                              + [("rest", 0.0, 2.0)], study_config, start_index=500_000)
    preds = model.predict_many(replay.frames)
    active = ~replay.rest_mask
    hits = [p.label.value == lab for p, lab, a in zip(preds, replay.labels, active) if a]
    agree = np.mean(hits)
    assert agree >= 0.95
    assert all(p.label is Gesture.REST for p, r in zip(preds, replay.rest_mask) if r)


def test_predict_many_equals_predict(study_training, study_trial_recording):
    model = train(study_training)
    frames = study_trial_recording.frames[:600]
    assert model.predict_many(frames) == [predict(f, model) for f in frames]


def test_proportion_range_and_rest_zero(study_training, study_trial_recording):
    model = train(study_training, d=10)
    for label, p in model.predict_many(study_trial_recording.frames):
        assert 0.0 <= p <= 1.0
        if label is Gesture.REST:
            assert p == 0.0


def test_active_count_non_increasing_in_gain(study_training, study_trial_recording):
    counts = []
    for g in (0.5, 1.0, 2.0, 2.5, 4.0, 8.0, 20.0):
        preds = train(study_training, g=g).predict_many(study_trial_recording.frames)
        counts.append(sum(p.label is not Gesture.REST for p in preds))
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[0] > counts[-1]


def test_label_invariant_under_scaling(study_training):
    model = train(study_training)
    rng = np.random.default_rng(0)
    t = model.rest.t
    for _ in range(200):
        f = np.abs(rng.normal(size=8)) + 0.01
        f *= (t + rng.uniform(0.01, 2.0)) / magnitude(f)
        for c in (1.5, 3.0):
            assert predict(c * f, model).label is predict(f, model).label


def _oracle_best_k(ds, candidates):
    keep = ~ds.rest_mask
    frames = ds.frames[keep].tolist()
    labels = ds.labels[keep].tolist()
    blocks = ds.blocks[keep].tolist()
    dist = oracles.make_distance("euclidean")
    acc = {k: oracles.blockwise_cv(frames, labels, blocks, k, dist, "inverse_squared")
           for k in candidates}
    best = max(acc.values())
    return min(k for k, a in acc.items() if a == best)


def test_train_auto_k_matches_cv_oracle():
    cfg = SynthConfig(seed=11, noise_rel=0.6, prototypes={
        "power": [2, 2, 1, 1, 1, 1, 0.5, 0.5], "point": [2, 1.5, 1.5, 1, 1, 1, 0.5, 0.5]})
    ds = generate_session([("rest", 0, 0.1), ("power", 1.0, 0.3), ("point", 1.0, 0.3)], cfg, repetitions=3)
    candidates = [1, 3, 5, 7]
    model = train(ds, auto_k=True, k_candidates=candidates)
    assert model.config.k == _oracle_best_k(ds, candidates)
    assert train(ds, config="auto", k_candidates=candidates).config.k == model.config.k


def test_knn_model_validates_class_coverage():
    model = train(tiny_dataset())
    with pytest.raises(TrainingError):
        KnnModel(model.train, model.config, model.rest,
                 ProportionalMap(5.0, model.prop.m0, {"power": 1.0}))
