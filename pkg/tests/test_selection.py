import numpy as np
import pytest

from myoprop.errors import ConfigError, CvError, ValidationError
from myoprop.selection import (
    CvReport,
    cross_validate,
    cv_accuracy,
    default_k_grid,
    make_blocks,
    select_k,
)
from myoprop.signals import LabeledDataset
from myoprop.synth import SynthConfig, generate_session

import oracles


def _ds(n, blocks=None, labels=None):
    rng = np.random.default_rng(n)
    labels = labels if labels is not None else ["power"] * n
    return LabeledDataset(np.abs(rng.normal(size=(n, 8))) + 0.1, labels,
                          [0 if lab == "rest" else 1 for lab in labels], blocks)


def test_make_blocks_by_id():
    blocks = make_blocks(_ds(6, [0, 0, 1, 1, 2, 2]))
    assert [b.tolist() for b in blocks] == [[0, 1], [2, 3], [4, 5]]


def test_make_blocks_fallback_five_equal():
    blocks = make_blocks(_ds(10))
    assert [len(b) for b in blocks] == [2] * 5
    assert np.concatenate(blocks).tolist() == list(range(10))


def test_make_blocks_errors():
    ds = _ds(6, [0, 0, 1, 1, 2, 2])
    ds.blocks = np.array([0, 0, 1, 1, 0, 0])
    with pytest.raises(ValidationError):
        make_blocks(ds)
    with pytest.raises(CvError):
        make_blocks(_ds(4))
    with pytest.raises(CvError):
        make_blocks(_ds(4, [3, 3, 3, 3]))


def two_clusters(n_per_block=5):
    a = np.r_[np.full(4, 2.0), np.full(4, 0.1)]
    b = np.r_[np.full(4, 0.1), np.full(4, 2.0)]
    rng = np.random.default_rng(0)
    frames, labels, blocks = [], [], []
    for blk in range(2):
        for proto, lab in ((a, "power"), (b, "point")):
            for _ in range(n_per_block):
                frames.append(proto * (1 + 0.05 * rng.normal(size=8)))
                labels.append(lab)
                blocks.append(blk)
    return LabeledDataset(np.abs(frames), labels, [1.0] * len(labels), blocks)


def test_cv_separable_clusters_perfect():
    assert cv_accuracy(two_clusters(), 1) == 1.0


def test_cv_matches_fold_loop_oracle_small_instance():
    rng = np.random.default_rng(1)
    labels = list(rng.choice(["power", "point", "flex"], 12))
    ds = LabeledDataset(np.abs(rng.normal(size=(12, 8))) + 0.05, labels, [1.0] * 12,
                        np.repeat([0, 1, 2], 4))
    for k in (1, 3, 5):
        for metric, kind, p in (("euclidean", "euclidean", 2), ("minkowski:1", "minkowski", 1)):
            for scheme in ("uniform", "inverse", "inverse_squared"):
                expected = oracles.blockwise_cv(ds.frames.tolist(), labels, ds.blocks.tolist(), k,
                                                oracles.make_distance(kind, p), scheme)
                assert cv_accuracy(ds, k, metric, scheme) == expected


def test_cv_ignores_rest_frames():
    ds = two_clusters()
    rest = LabeledDataset(np.full((2, 8), 0.05), ["rest", "rest"], [0, 0], [0, 1])
    merged = LabeledDataset(np.vstack([ds.frames[:10], rest.frames[:1], ds.frames[10:], rest.frames[1:]]),
                            list(ds.labels[:10]) + ["rest"] + list(ds.labels[10:]) + ["rest"],
                            list(ds.levels[:10]) + [0] + list(ds.levels[10:]) + [0],
                            [0] * 11 + [1] * 11)
    assert cv_accuracy(merged, 3) == cv_accuracy(ds, 3)


def test_cv_chance_level_on_shuffled_labels():
    rng = np.random.default_rng(2)
    n, classes = 600, ["power", "point", "flex"]
    frames = np.abs(1 + 0.3 * rng.normal(size=(n, 8)))  # one symmetric cloud
    accs = [cv_accuracy(LabeledDataset(frames, list(rng.choice(classes, n)), [1.0] * n,
                                       np.repeat(np.arange(6), n // 6)), 1)
            for _ in range(5)]
    # binomial standard error of the averaged accuracy
    se = np.sqrt((1 / 3) * (2 / 3) / (n * len(accs)))
    assert abs(np.mean(accs) - 1 / 3) <= 4 * se


def test_cv_k_exceeds_fold():
    with pytest.raises(ConfigError):
        cv_accuracy(two_clusters(), 11)


def test_default_k_grid():
    assert default_k_grid(10) == [1]
    assert default_k_grid(100) == [1, 3, 5, 7, 9]
    assert default_k_grid(240) == list(range(1, 25, 2))
    assert default_k_grid(241) == list(range(1, 26, 2))


def test_select_k_ties_pick_smallest():
    k, report = select_k(two_clusters(), [5, 3, 1])
    assert k == 1
    assert isinstance(report, CvReport)
    assert [r.k for r in report.rows] == [1, 3, 5]
    assert all(r.accuracy == 1.0 for r in report.rows)
    assert report.chosen == (1, "euclidean", "inverse_squared")


def overlap_dataset(seed=5):
    cfg = SynthConfig(seed=seed, noise_rel=0.5, prototypes={
        "power": [2, 2, 1.5, 1, 1, 1, 0.5, 0.5], "point": [2, 1.5, 1.5, 1.2, 1, 1, 0.5, 0.5],
        "flex": [1.5, 2, 1.5, 1, 1, 1, 0.6, 0.4]})
    script = [("rest", 0, 0.1), ("power", 1.0, 0.4), ("point", 1.0, 0.4), ("flex", 1.0, 0.4)]
    return generate_session(script, cfg, repetitions=3)


def test_select_k_matches_exhaustive_oracle():
    ds = overlap_dataset()
    candidates = [1, 3, 5, 7, 9]
    keep = ~ds.rest_mask
    dist = oracles.make_distance("euclidean")
    acc = {k: oracles.blockwise_cv(ds.frames[keep].tolist(), ds.labels[keep].tolist(),
                                   ds.blocks[keep].tolist(), k, dist, "inverse_squared")
           for k in candidates}
    best = max(acc.values())
    k, report = select_k(ds, candidates)
    assert k == min(c for c in candidates if acc[c] == best)
    assert {r.k: r.accuracy for r in report.rows} == acc


def test_cross_validate_grid_and_chosen_row():
    ds = overlap_dataset()
    report = cross_validate(ds, [1, 3], ["euclidean", "minkowski:1", "mahalanobis"],
                            ["uniform", "inverse_squared"])
    assert len(report.rows) == 12
    best = max(r.accuracy for r in report.rows)
    chosen = [r for r in report.rows if (r.k, r.metric, r.weighting) == report.chosen]
    assert chosen and chosen[0].accuracy == best
    assert all(0 <= r.accuracy <= 1 for r in report.rows)


def test_accuracy_invariant_under_label_renaming():
    ds = overlap_dataset()
    rename = {"power": "ext", "point": "power", "flex": "sup", "rest": "rest"}
    renamed = LabeledDataset(ds.frames, [rename[v] for v in ds.labels], ds.levels, ds.blocks)
    for k in (1, 3):
        assert cv_accuracy(ds, k) == cv_accuracy(renamed, k)


def test_duplicated_training_frames_keep_k1_accuracy():
    ds = two_clusters()
    idx = np.concatenate([np.flatnonzero(ds.blocks == b).repeat(2) for b in (0, 1)])
    assert cv_accuracy(ds.subset(idx), 1) >= cv_accuracy(ds, 1)
