import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import make_session
from stress_transfer import settings
from stress_transfer.exceptions import DegenerateChannelError, InvalidArgumentError, ShapeError, WindowingError
from stress_transfer.items import WindowedDataset
from stress_transfer.windowing import (apply_normalizer, class_balance_report, concat_datasets,
                                       contiguous_runs, fit_normalizer, invert_normalizer, kfold_split,
                                       segment_windows, stratified_split, window_count)


@pytest.mark.parametrize('length', [1, 5, 399, 400, 401, 499, 500, 1000, 1337])
@pytest.mark.parametrize('window_len, stride', [(400, 100), (400, 200), (86, 1), (50, 50)])
def test_window_count_matches_brute_force(length, window_len, stride):
    brute = sum(1 for start in range(0, length, stride) if start + window_len <= length)
    assert window_count(length, window_len, stride) == brute


def test_segment_count_and_contents():
    session = make_session(1000)
    dataset = segment_windows(session, 400, 200)
    assert len(dataset) == 4
    assert dataset.windows.shape == (4, 3, 400)
    assert_array_equal(dataset.start_ms, session.timestamp_ms[[0, 200, 400, 600]])
    assert_allclose(dataset.windows[1], session.values[200:600].T.astype(np.float32))


def test_session_shorter_than_window():
    with pytest.raises(WindowingError):
        segment_windows(make_session(399), 400, 100)
    assert len(segment_windows(make_session(400), 400, 100)) == 1


def test_majority_label_and_ties():
    labels = np.array([settings.RELAXED] * 50 + [settings.STRESSED] * 50)
    dataset = segment_windows(make_session(100, labels), 100, 100)
    assert dataset.labels.tolist() == [settings.STRESSED]

    labels = np.array([settings.RELAXED] * 60 + [settings.STRESSED] * 40)
    assert segment_windows(make_session(100, labels), 100, 100).labels.tolist() == [settings.RELAXED]


def test_unlabeled_samples_do_not_vote():
    labels = np.array([settings.UNLABELED] * 40 + [settings.STRESSED] * 25 + [settings.RELAXED] * 35)
    assert segment_windows(make_session(100, labels), 100, 100).labels.tolist() == [settings.RELAXED]


def test_mostly_unlabeled_windows(caplog):
    labels = np.array([settings.STRESSED] * 100 + [settings.UNLABELED] * 100)
    with caplog.at_level(logging.INFO):
        dataset = segment_windows(make_session(200, labels), 100, 50)
    # windows at 0 and 50 keep; at 100 the window is all unlabeled
    assert dataset.labels.tolist() == [settings.STRESSED, settings.STRESSED]
    assert 'Dropped 1' in caplog.text

    kept = segment_windows(make_session(200, labels), 100, 50, keep_unlabeled=True)
    assert kept.labels.tolist() == [settings.STRESSED, settings.STRESSED, settings.UNLABELED]

    with pytest.raises(WindowingError):
        segment_windows(make_session(200, np.full(200, settings.UNLABELED)), 100, 50)


def test_windows_do_not_span_gaps():
    timestamps = np.round(np.arange(300) * 1000. / settings.SAMPLE_RATE_HZ).astype(np.int64)
    timestamps[150:] += 5000
    session = make_session(300, timestamps=timestamps)
    assert contiguous_runs(session) == [(0, 150), (150, 300)]

    dataset = segment_windows(session, 100, 50)
    # two windows per run, none across the gap
    assert len(dataset) == 4
    assert_array_equal(dataset.start_ms, timestamps[[0, 50, 150, 200]])


def test_small_jitter_is_not_a_gap():
    timestamps = np.round(np.arange(200) * 1000. / settings.SAMPLE_RATE_HZ).astype(np.int64)
    timestamps[100:] += 10
    assert contiguous_runs(make_session(200, timestamps=timestamps)) == [(0, 200)]


def test_kfold_sizes_are_disjoint_and_complete():
    splits = kfold_split(101, 10, seed=3)
    sizes = sorted(len(test) for _, test in splits)
    assert sizes == [10] * 9 + [11]

    tests = [set(test.tolist()) for _, test in splits]
    assert set().union(*tests) == set(range(101))
    assert sum(len(t) for t in tests) == 101
    for train, test in splits:
        assert not set(train.tolist()) & set(test.tolist())
        assert len(train) + len(test) == 101


def test_kfold_is_deterministic():
    a = kfold_split(50, 5, seed=1)
    b = kfold_split(50, 5, seed=1)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    with pytest.raises(InvalidArgumentError):
        kfold_split(3, 5)
    with pytest.raises(InvalidArgumentError):
        kfold_split(10, 1)


def test_normalizer_centres_training_data():
    dataset = segment_windows(make_session(2000), 100, 50)
    normalized = apply_normalizer(dataset, fit_normalizer(dataset))
    values = normalized.windows.astype(np.float64)
    assert_allclose(values.mean(axis=(0, 2)), 0., atol=1e-4)
    assert_allclose(values.std(axis=(0, 2)), 1., atol=1e-3)


def test_normalizer_round_trip():
    dataset = segment_windows(make_session(1000), 100, 100)
    restored = invert_normalizer(apply_normalizer(dataset, fit_normalizer(dataset)))
    assert_allclose(restored.windows, dataset.windows, rtol=1e-4)
    assert not restored.normalized


def test_normalizer_rejects_constant_channel():
    windows = np.ones((4, 3, 10), dtype=np.float32)
    windows[:, 0] = np.random.default_rng(0).normal(size=(4, 10))
    with pytest.raises(DegenerateChannelError, match='hrv'):
        fit_normalizer(WindowedDataset(windows, np.zeros(4)))


def test_normalizer_refuses_double_application():
    dataset = segment_windows(make_session(500), 100, 100)
    normalized = apply_normalizer(dataset, fit_normalizer(dataset))
    with pytest.raises(InvalidArgumentError):
        apply_normalizer(normalized, normalized.norm_stats)
    with pytest.raises(InvalidArgumentError):
        fit_normalizer(normalized)


def test_class_balance_report(caplog):
    report = class_balance_report(np.array([0] * 7 + [1] * 3))
    assert report.counts == {settings.RELAXED: 7, settings.STRESSED: 3}
    assert report.ratios[settings.STRESSED] == pytest.approx(0.3)
    assert report.warning
    assert 'imbalance' in caplog.text

    assert not class_balance_report(np.array([0, 1, 0, 1, -1])).warning


def test_stratified_split_keeps_both_classes():
    labels = np.array([0] * 20 + [1] * 5)
    train, test = stratified_split(labels, 0.2, seed=0)
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(25))
    assert set(labels[test].tolist()) == {0, 1}
    assert (labels[test] == 0).sum() == 4
    assert (labels[test] == 1).sum() == 1


def test_concat_requires_matching_shapes():
    a = segment_windows(make_session(500), 100, 100)
    b = segment_windows(make_session(500, seed=1), 50, 50)
    with pytest.raises(ShapeError):
        concat_datasets([a, b])
    pooled = concat_datasets([a, segment_windows(make_session(300, seed=2), 100, 100)])
    assert len(pooled) == 8
