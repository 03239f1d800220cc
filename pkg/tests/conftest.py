import numpy as np
import pytest

from stress_transfer import settings
from stress_transfer.items import Session, WindowedDataset
from stress_transfer.model import build_base_model, minimum_window_len


def make_session(
        n: int = 1000,
        labels=None,
        subject_id: str = 'test',
        seed: int = 0,
        timestamps=None,
        ) -> Session:
    rng = np.random.default_rng(seed)
    values = np.column_stack([
        70. + rng.normal(0., 3., n),
        40. + np.abs(rng.normal(0., 5., n)),
        300. + np.abs(rng.normal(0., 30., n)),
        ])
    if labels is None:
        labels = np.full(n, settings.RELAXED)
    if timestamps is None:
        timestamps = np.round(np.arange(n) * 1000. / settings.SAMPLE_RATE_HZ).astype(np.int64)
    return Session(subject_id, timestamps, values, labels)


def blob_dataset(n: int = 80, window_len: int = 86, seed: int = 0, separation: float = 2.) -> WindowedDataset:
    '''Two classes whose windows differ by a constant offset on every channel.'''
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    windows = rng.normal(0., 1., (n, len(settings.CHANNELS), window_len))
    windows += np.where(labels == settings.STRESSED, separation, -separation)[:, None, None]
    windows += np.array([70., 40., 300.])[None, :, None]
    return WindowedDataset(windows, labels, subject_id=f'blobs_{seed}')


@pytest.fixture
def short_window() -> int:
    return minimum_window_len()


@pytest.fixture
def tiny_model(short_window):
    return build_base_model(window_len=short_window, seed=0, hidden_width=8)


@pytest.fixture
def blobs(short_window) -> WindowedDataset:
    return blob_dataset(window_len=short_window)
