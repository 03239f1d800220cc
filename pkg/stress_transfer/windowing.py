import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from stress_transfer import settings
from stress_transfer.exceptions import (DegenerateChannelError, InvalidArgumentError, ShapeError,
                                        WindowingError)
from stress_transfer.items import NormStats, Session, WindowedDataset


_logger = logging.getLogger(__name__)


def contiguous_runs(session: Session) -> list[tuple[int, int]]:
    '''[start, stop) index ranges separated by timestamp gaps.'''
    if len(session) == 0:
        return []
    gaps = np.diff(session.timestamp_ms) > settings.MAX_GAP_PERIODS * session.period_ms
    breaks = np.flatnonzero(gaps) + 1
    bounds = np.concatenate(([0], breaks, [len(session)]))
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def window_count(length: int, window_len: int, stride: int) -> int:
    if length < window_len:
        return 0
    return (length - window_len) // stride + 1


def segment_windows(
        session: Session,
        window_len: int = settings.WINDOW_LEN,
        stride: int = settings.WINDOW_STRIDE,
        keep_unlabeled: bool = False,
        ) -> WindowedDataset:
    '''
    Cut fixed-length windows every `stride` samples inside each contiguous run
    of `session`. A window is labelled by majority vote of its labelled
    samples (ties go to stressed); windows with more than half unlabeled
    samples are dropped, or kept with label -1 when `keep_unlabeled` is set.
    '''
    if window_len < 1 or stride < 1:
        raise InvalidArgumentError(f'window length and stride must be positive, got {window_len} and {stride}')
    if len(session) < window_len:
        raise WindowingError(
            f'session {session.subject_id!r} has {len(session)} samples, shorter than one window of {window_len}')

    windows, labels, starts = [], [], []
    dropped = 0
    for begin, end in contiguous_runs(session):
        count = window_count(end - begin, window_len, stride)
        if count == 0:
            _logger.debug(f'Run [{begin}, {end}) of {session.subject_id} is shorter than a window')
            continue

        offsets = np.arange(count) * stride
        values = session.values[begin:end].T.astype(np.float32)  # [3, L]
        run_windows = sliding_window_view(values, window_len, axis=1)[:, offsets].transpose(1, 0, 2)

        run_labels = session.labels[begin:end]
        counts = {}
        for label in (settings.UNLABELED, settings.RELAXED, settings.STRESSED):
            cumulative = np.concatenate(([0], np.cumsum(run_labels == label)))
            counts[label] = cumulative[offsets + window_len] - cumulative[offsets]

        window_labels = np.where(
            counts[settings.STRESSED] >= counts[settings.RELAXED], settings.STRESSED, settings.RELAXED)
        mostly_unlabeled = counts[settings.UNLABELED] * 2 > window_len
        if keep_unlabeled:
            window_labels = np.where(mostly_unlabeled, settings.UNLABELED, window_labels)
            keep = np.ones(count, dtype=bool)
        else:
            keep = ~mostly_unlabeled
            dropped += int(mostly_unlabeled.sum())

        windows.append(run_windows[keep])
        labels.append(window_labels[keep])
        starts.append(session.timestamp_ms[begin + offsets[keep]])

    if dropped:
        _logger.info(f'Dropped {dropped} mostly unlabeled windows from {session.subject_id}')

    n_windows = sum(len(w) for w in windows)
    if n_windows == 0:
        raise WindowingError(f'session {session.subject_id!r} produced no labelled windows')

    return WindowedDataset(
        windows=np.concatenate(windows),
        labels=np.concatenate(labels),
        start_ms=np.concatenate(starts),
        subject_id=session.subject_id,
        )


def concat_datasets(datasets: list[WindowedDataset], subject_id: str = 'pooled') -> WindowedDataset:
    if len(datasets) == 0:
        raise InvalidArgumentError('no datasets to concatenate')
    if len({d.windows.shape[1:] for d in datasets}) != 1:
        raise ShapeError('pooled windows', list(datasets[0].windows.shape[1:]),
                         [list(d.windows.shape[1:]) for d in datasets])
    if len({d.norm_stats for d in datasets}) != 1:
        raise InvalidArgumentError('cannot pool datasets normalised with different statistics')

    starts = None
    if all(d.start_ms is not None for d in datasets):
        starts = np.concatenate([d.start_ms for d in datasets])
    return WindowedDataset(
        windows=np.concatenate([d.windows for d in datasets]),
        labels=np.concatenate([d.labels for d in datasets]),
        norm_stats=datasets[0].norm_stats,
        start_ms=starts,
        subject_id=subject_id,
        )


def fit_normalizer(dataset: WindowedDataset) -> NormStats:
    if dataset.normalized:
        raise InvalidArgumentError('normalisation statistics must be fit on raw windows')
    if len(dataset) == 0:
        raise InvalidArgumentError('cannot fit normalisation statistics on an empty dataset')

    values = dataset.windows.astype(np.float64)
    mean = values.mean(axis=(0, 2))
    std = values.std(axis=(0, 2))
    for channel, s in zip(settings.CHANNELS, std):
        if not s > 1e-12:
            raise DegenerateChannelError(f'degenerate channel {channel!r}: zero variance')

    return NormStats.from_arrays(mean, std)


def apply_normalizer(dataset: WindowedDataset, norm_stats: NormStats) -> WindowedDataset:
    if dataset.normalized:
        raise InvalidArgumentError(f'dataset {dataset.subject_id!r} is already normalised')
    mean = norm_stats.mean_array()[None, :, None]
    std = norm_stats.std_array()[None, :, None]
    return WindowedDataset(
        windows=(dataset.windows - mean) / std,
        labels=dataset.labels,
        norm_stats=norm_stats,
        start_ms=dataset.start_ms,
        subject_id=dataset.subject_id,
        )


def invert_normalizer(dataset: WindowedDataset) -> WindowedDataset:
    if not dataset.normalized:
        raise InvalidArgumentError(f'dataset {dataset.subject_id!r} is not normalised')
    stats = dataset.norm_stats
    return WindowedDataset(
        windows=dataset.windows * stats.std_array()[None, :, None] + stats.mean_array()[None, :, None],
        labels=dataset.labels,
        start_ms=dataset.start_ms,
        subject_id=dataset.subject_id,
        )


def kfold_split(dataset: WindowedDataset | int, k: int, seed: int = settings.SEED) -> list[tuple[np.ndarray, np.ndarray]]:
    '''
    Shuffled folds whose sizes differ by at most one. Returns one
    (train_indices, test_indices) pair per fold.
    '''
    n = dataset if isinstance(dataset, int) else len(dataset)
    if k < 2:
        raise InvalidArgumentError(f'k-fold needs k >= 2, got {k}')
    if n < k:
        raise InvalidArgumentError(f'k-fold needs at least k={k} examples, got {n}')

    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)
    splits = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        splits.append((np.sort(train), np.sort(test)))
    return splits


def stratified_split(
        labels: np.ndarray,
        test_fraction: float = settings.USER_TEST_FRACTION,
        seed: int = settings.SEED,
        ) -> tuple[np.ndarray, np.ndarray]:
    '''Per-class shuffled split keeping at least one example of each class on both sides.'''
    if not 0 < test_fraction < 1:
        raise InvalidArgumentError(f'test fraction must be in (0, 1), got {test_fraction}')
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)

    train, test = [], []
    for label in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == label))
        n_test = int(round(len(members) * test_fraction))
        if len(members) >= 2:
            n_test = min(max(n_test, 1), len(members) - 1)
        else:
            n_test = 0
        test.append(members[:n_test])
        train.append(members[n_test:])

    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class BalanceReport:
    counts: dict[int, int]
    total: int
    warning: bool

    @property
    def ratios(self) -> dict[int, float]:
        return {label: count / self.total for label, count in self.counts.items()}

    def describe(self) -> str:
        parts = [
            f'{settings.CLASS_NAMES[label]}: {count} ({count / self.total:.1%})'
            for label, count in self.counts.items()
            ]
        return ', '.join(parts)


def class_balance_report(
        labels: WindowedDataset | np.ndarray,
        min_ratio: float = settings.MIN_CLASS_RATIO,
        ) -> BalanceReport:
    '''Exact per-class counts; warns when the minority class is below `min_ratio` of the total.'''
    if isinstance(labels, WindowedDataset):
        labels = labels.labels
    labels = np.asarray(labels)
    labels = labels[labels != settings.UNLABELED]
    if len(labels) == 0:
        raise InvalidArgumentError('cannot report class balance of an empty dataset')

    counts = {label: int((labels == label).sum()) for label in (settings.RELAXED, settings.STRESSED)}
    total = sum(counts.values())
    minority = min(counts.values()) / total
    warning = minority < min_ratio
    if warning:
        _logger.warning(f'Class imbalance: minority class is {minority:.1%} of {total} examples')

    return BalanceReport(counts=counts, total=total, warning=warning)
