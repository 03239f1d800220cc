# Record types shared by the data, model and transfer layers.
#
# Sessions are stored column-wise (one numpy array per field) since a
# 22-minute recording already holds ~40k samples; `SensorSample` is the
# row view used by the CSV exporter and the live session.

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from stress_transfer import settings
from stress_transfer.exceptions import InvalidArgumentError


_VALID_LABELS = (settings.UNLABELED, settings.RELAXED, settings.STRESSED)


@dataclass(frozen=True)
class SensorSample:
    timestamp_ms: int
    hr: float
    hrv: float
    eda: float
    label: int = settings.UNLABELED

    def __post_init__(self):
        if not self.hr > 0:
            raise InvalidArgumentError(f'hr must be positive, got {self.hr}')
        if not self.hrv >= 0:
            raise InvalidArgumentError(f'hrv must be non-negative, got {self.hrv}')
        if not self.eda >= 0:
            raise InvalidArgumentError(f'eda must be non-negative, got {self.eda}')
        if self.label not in _VALID_LABELS:
            raise InvalidArgumentError(f'label must be one of {_VALID_LABELS}, got {self.label}')


@dataclass
class Session:
    subject_id: str
    timestamp_ms: np.ndarray
    values: np.ndarray  # [L, 3] in settings.CHANNELS order
    labels: np.ndarray
    sample_rate_hz: float = settings.SAMPLE_RATE_HZ

    def __post_init__(self):
        self.timestamp_ms = np.asarray(self.timestamp_ms, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)

        n = len(self.timestamp_ms)
        if self.values.shape != (n, len(settings.CHANNELS)) or self.labels.shape != (n,):
            raise InvalidArgumentError(
                f'session {self.subject_id!r}: inconsistent column lengths '
                f'{self.timestamp_ms.shape}, {self.values.shape}, {self.labels.shape}')
        if not self.sample_rate_hz > 0:
            raise InvalidArgumentError(f'sample rate must be positive, got {self.sample_rate_hz}')
        if n > 1 and np.any(np.diff(self.timestamp_ms) <= 0):
            raise InvalidArgumentError(f'session {self.subject_id!r}: timestamps are not strictly increasing')
        if n > 0:
            if np.any(self.values[:, 0] <= 0):
                raise InvalidArgumentError(f'session {self.subject_id!r}: hr must be positive')
            if np.any(self.values[:, 1:] < 0):
                raise InvalidArgumentError(f'session {self.subject_id!r}: hrv and eda must be non-negative')
            if not np.isin(self.labels, _VALID_LABELS).all():
                raise InvalidArgumentError(f'session {self.subject_id!r}: labels must be in {_VALID_LABELS}')

    @classmethod
    def from_samples(
            cls,
            subject_id: str,
            samples: list[SensorSample],
            sample_rate_hz: float = settings.SAMPLE_RATE_HZ,
            ) -> 'Session':
        return cls(
            subject_id=subject_id,
            timestamp_ms=[s.timestamp_ms for s in samples],
            values=np.array([(s.hr, s.hrv, s.eda) for s in samples], dtype=np.float64).reshape(-1, 3),
            labels=[s.label for s in samples],
            sample_rate_hz=sample_rate_hz,
            )

    @property
    def period_ms(self) -> float:
        return 1000. / self.sample_rate_hz

    @property
    def samples(self) -> list[SensorSample]:
        return list(self)

    def sample(self, i: int) -> SensorSample:
        hr, hrv, eda = self.values[i]
        return SensorSample(int(self.timestamp_ms[i]), float(hr), float(hrv), float(eda), int(self.labels[i]))

    def __len__(self) -> int:
        return len(self.timestamp_ms)

    def __iter__(self) -> Iterator[SensorSample]:
        for i in range(len(self)):
            yield self.sample(i)


@dataclass(frozen=True)
class NormStats:
    '''Per-channel z-score statistics, stored at float32 precision.'''
    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise InvalidArgumentError('mean and std must have the same length')
        if not all(s > 0 for s in self.std):
            raise InvalidArgumentError(f'std must be positive per channel, got {self.std}')

    @classmethod
    def from_arrays(cls, mean, std) -> 'NormStats':
        mean = np.asarray(mean, dtype=np.float32)
        std = np.asarray(std, dtype=np.float32)
        return cls(tuple(float(m) for m in mean), tuple(float(s) for s in std))

    def mean_array(self) -> np.ndarray:
        return np.asarray(self.mean, dtype=np.float32)

    def std_array(self) -> np.ndarray:
        return np.asarray(self.std, dtype=np.float32)


@dataclass
class WindowedDataset:
    windows: np.ndarray  # [N, 3, W] float32
    labels: np.ndarray  # [N]
    norm_stats: NormStats | None = None  # None while the windows are raw
    start_ms: np.ndarray | None = None
    subject_id: str = ''

    def __post_init__(self):
        self.windows = np.asarray(self.windows, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.windows.ndim != 3 or len(self.windows) != len(self.labels):
            raise InvalidArgumentError(
                f'windows must be [N, C, W] with one label each, got {self.windows.shape} '
                f'and {self.labels.shape} labels')
        if self.start_ms is not None:
            self.start_ms = np.asarray(self.start_ms, dtype=np.int64)

    @property
    def window_len(self) -> int:
        return self.windows.shape[2]

    @property
    def normalized(self) -> bool:
        return self.norm_stats is not None

    def subset(self, indices) -> 'WindowedDataset':
        indices = np.asarray(indices, dtype=np.int64)
        return WindowedDataset(
            windows=self.windows[indices],
            labels=self.labels[indices],
            norm_stats=self.norm_stats,
            start_ms=None if self.start_ms is None else self.start_ms[indices],
            subject_id=self.subject_id,
            )

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class SubjectProfile:
    '''Physiology of one simulated subject, per channel in settings.CHANNELS order.'''
    baseline: tuple[float, float, float]
    stress_shift: tuple[float, float, float]
    noise_scale: tuple[float, float, float]
    # multiplies noise_scale while stressed
    stress_noise_gain: tuple[float, float, float] = (1., 1., 1.)
    drift_scale: tuple[float, float, float] = (1., 1., 1.)
    drift_tau_s: float = 30.
    seed: int = 0
    subject_id: str = field(default='subject')

    def __post_init__(self):
        for name in ('baseline', 'stress_shift', 'noise_scale', 'stress_noise_gain', 'drift_scale'):
            if len(getattr(self, name)) != len(settings.CHANNELS):
                raise InvalidArgumentError(f'{name} needs one value per channel')
        if not all(s > 0 for s in self.noise_scale):
            raise InvalidArgumentError(f'noise scales must be positive, got {self.noise_scale}')
        if not all(g > 0 for g in self.stress_noise_gain):
            raise InvalidArgumentError(f'stress noise gains must be positive, got {self.stress_noise_gain}')
        if not all(d >= 0 for d in self.drift_scale):
            raise InvalidArgumentError(f'drift scales must be non-negative, got {self.drift_scale}')
        if not self.drift_tau_s > 0:
            raise InvalidArgumentError(f'drift time constant must be positive, got {self.drift_tau_s}')
