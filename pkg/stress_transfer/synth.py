# Synthetic HR/HRV/EDA streams
#
# Per channel: value = subject baseline + stress shift (while stressed)
#                      + mean-reverting drift + coloured noise
# The noise scale is multiplied by a per-subject gain while stressed, so
# stress changes the texture of a signal as well as its level.
#
# Base population defaults reproduce the controlled-experiment statistics:
#   HR  relaxed 76.8 (SD 10.7), stressed 81.2 (SD 12.4)
#   EDA relaxed 351.9 (SD 152.8), stressed 317.2 (SD 148.3)
# HRV has no reported statistics; it drops under stress.


import logging

import numpy as np
from scipy.signal import lfilter

from stress_transfer import settings
from stress_transfer.exceptions import InvalidArgumentError
from stress_transfer.items import Session, SubjectProfile


_logger = logging.getLogger(__name__)

PHASE_LABELS = {'relaxed': settings.RELAXED, 'stressed': settings.STRESSED}

# hr, hrv, eda
BASE_MEAN = np.array([76.8, 45., 351.9])
BASE_SPREAD = np.array([9.5, 12., 138.])
STRESS_SHIFT_MEAN = np.array([4.4, -12., -34.7])
STRESS_SHIFT_SPREAD = np.array([3., 4., 15.])
DRIFT_SCALE = np.array([3.5, 4., 40.])
NOISE_SCALE = np.array([3.46, 5., 52.])
STRESS_NOISE_GAIN = np.array([1.9, 0.7, 0.64])
NOISE_TAU_S = 0.5
DRIFT_TAU_S = 30.
HR_FLOOR = 30.

# Real-world target users: offset baselines, noisier sensors, and a stress
# response whose direction differs from the base population on two channels.
# The four sign patterns below (base first) pairwise differ on two channels.
BASE_RESPONSE = (1, -1, -1)
TARGET_RESPONSES = ((-1, 1, -1), (-1, -1, 1), (1, 1, 1))
TARGET_OFFSET = np.array([6., -8., 120.])
TARGET_SPREAD_SCALE = 2.
TARGET_SHIFT_SCALE = 1.5
TARGET_NOISE_SCALE = 1.5
_BASELINE_FLOOR = np.array([45., 10., 60.])


def montreal_schedule() -> list[tuple[str, float]]:
    '''Rest, training, rest, 10 minutes of stressor, rest. Training is labelled relaxed.'''
    return [
        ('relaxed', 180.),
        ('relaxed', 180.),
        ('relaxed', 180.),
        ('stressed', 600.),
        ('relaxed', 180.),
        ]


def everyday_schedule(
        total_s: float = 1320.,
        seed: int = settings.SEED,
        relaxed_s: tuple[float, float] = (90., 240.),
        stressed_s: tuple[float, float] = (60., 180.),
        ) -> list[tuple[str, float]]:
    '''
    Alternating relaxed/stressed bouts of random length adding up to
    `total_s`, starting relaxed; stands in for a self-labelled day.
    '''
    if not total_s > 0:
        raise InvalidArgumentError(f'total duration must be positive, got {total_s}')
    rng = np.random.default_rng(seed)
    schedule = []
    elapsed = 0.
    phase = 'relaxed'
    while elapsed < total_s:
        low, high = relaxed_s if phase == 'relaxed' else stressed_s
        duration = min(float(np.round(rng.uniform(low, high))), total_s - elapsed)
        schedule.append((phase, duration))
        elapsed += duration
        phase = 'stressed' if phase == 'relaxed' else 'relaxed'
    return schedule


def _unit_ar1(rng: np.random.Generator, n: int, phi: float) -> np.ndarray:
    '''[n, 3] stationary first-order autoregressive noise with unit variance.'''
    white = rng.standard_normal((n, len(settings.CHANNELS)))
    start = rng.standard_normal(len(settings.CHANNELS))
    zi = (phi * start)[None, :]
    out, _ = lfilter([np.sqrt(1. - phi ** 2)], [1., -phi], white, axis=0, zi=zi)
    return out


def synth_generate(
        profile: SubjectProfile,
        schedule: list[tuple[str, float]],
        sample_rate_hz: float = settings.SAMPLE_RATE_HZ,
        start_ms: int = 0,
        ) -> Session:
    if len(schedule) == 0:
        raise InvalidArgumentError('empty schedule')

    labels = []
    for phase, duration in schedule:
        if phase not in PHASE_LABELS:
            raise InvalidArgumentError(f'unknown phase {phase!r}, expected one of {tuple(PHASE_LABELS)}')
        if not duration > 0:
            raise InvalidArgumentError(f'phase durations must be positive, got {duration}')
        labels.append(np.full(int(round(duration * sample_rate_hz)), PHASE_LABELS[phase], dtype=np.int8))
    labels = np.concatenate(labels)
    n = len(labels)
    stressed = (labels == settings.STRESSED)[:, None]

    rng = np.random.default_rng(profile.seed)
    dt = 1. / sample_rate_hz
    drift = _unit_ar1(rng, n, np.exp(-dt / profile.drift_tau_s)) * np.asarray(profile.drift_scale)
    noise_scale = np.where(stressed,
                           np.asarray(profile.noise_scale) * np.asarray(profile.stress_noise_gain),
                           np.asarray(profile.noise_scale))
    noise = _unit_ar1(rng, n, np.exp(-dt / NOISE_TAU_S)) * noise_scale

    values = np.asarray(profile.baseline) + stressed * np.asarray(profile.stress_shift) + drift + noise
    values[:, 0] = np.maximum(values[:, 0], HR_FLOOR)
    values[:, 1:] = np.maximum(values[:, 1:], 0.)

    timestamps = start_ms + np.round(np.arange(n) * 1000. / sample_rate_hz).astype(np.int64)
    _logger.debug(f'Generated {n} samples for {profile.subject_id}')
    return Session(
        subject_id=profile.subject_id,
        timestamp_ms=timestamps,
        values=values,
        labels=labels,
        sample_rate_hz=sample_rate_hz,
        )


def _standardized(z: np.ndarray) -> np.ndarray:
    # exact zero mean and unit spread per column, so pooled means hit their targets
    if len(z) < 2:
        return np.zeros_like(z)
    return (z - z.mean(axis=0)) / z.std(axis=0)


def _as_tuple(row: np.ndarray) -> tuple[float, float, float]:
    return tuple(float(v) for v in row)


def sample_population(n: int, seed: int = settings.SEED, shifted: bool = False) -> list[SubjectProfile]:
    '''
    Draw `n` subject profiles. The base population is re-centred so its
    pooled baselines and stress shifts match the reported means exactly;
    `shifted` draws real-world target users instead.
    '''
    if n < 1:
        raise InvalidArgumentError(f'population size must be positive, got {n}')
    if shifted:
        return _sample_targets(n, seed)

    rng = np.random.default_rng(seed)
    baselines = BASE_MEAN + _standardized(rng.standard_normal((n, 3))) * BASE_SPREAD
    shifts = STRESS_SHIFT_MEAN + _standardized(rng.standard_normal((n, 3))) * STRESS_SHIFT_SPREAD
    noise = NOISE_SCALE * np.exp(rng.normal(0., 0.15, (n, 3)))
    gains = STRESS_NOISE_GAIN * np.exp(rng.normal(0., 0.1, (n, 3)))
    seeds = rng.integers(0, 2 ** 31, n)

    return [
        SubjectProfile(
            baseline=_as_tuple(baselines[i]),
            stress_shift=_as_tuple(shifts[i]),
            noise_scale=_as_tuple(noise[i]),
            stress_noise_gain=_as_tuple(gains[i]),
            drift_scale=_as_tuple(DRIFT_SCALE),
            drift_tau_s=DRIFT_TAU_S,
            seed=int(seeds[i]),
            subject_id=f'subject_{i + 1:02d}',
            )
        for i in range(n)
        ]


def _sample_targets(n: int, seed: int) -> list[SubjectProfile]:
    rng = np.random.default_rng([seed, 1])
    order = rng.permutation(len(TARGET_RESPONSES))
    profiles = []
    for i in range(n):
        signs = np.asarray(TARGET_RESPONSES[order[i % len(order)]])
        flipped = signs * np.asarray(BASE_RESPONSE)  # -1 where the response is reversed

        baseline = BASE_MEAN + TARGET_OFFSET + rng.normal(0., TARGET_SPREAD_SCALE * BASE_SPREAD)
        baseline = np.maximum(baseline, _BASELINE_FLOOR)
        shift = signs * np.abs(STRESS_SHIFT_MEAN) * TARGET_SHIFT_SCALE * np.exp(rng.normal(0., 0.2, 3))
        noise = NOISE_SCALE * TARGET_NOISE_SCALE * np.exp(rng.normal(0., 0.2, 3))
        gains = STRESS_NOISE_GAIN ** flipped * np.exp(rng.normal(0., 0.1, 3))

        profiles.append(SubjectProfile(
            baseline=_as_tuple(baseline),
            stress_shift=_as_tuple(shift),
            noise_scale=_as_tuple(noise),
            stress_noise_gain=_as_tuple(gains),
            drift_scale=_as_tuple(DRIFT_SCALE * TARGET_NOISE_SCALE),
            drift_tau_s=DRIFT_TAU_S,
            seed=int(rng.integers(0, 2 ** 31)),
            subject_id=f'user_{i + 1}',
            ))
    return profiles


def synth_corpus(
        base_subjects: int = settings.BASE_SUBJECTS,
        target_subjects: int = settings.TARGET_SUBJECTS,
        seed: int = settings.SEED,
        ) -> tuple[list[Session], list[Session]]:
    '''
    Base population on the controlled protocol, and target users each with
    one protocol's worth of self-labelled everyday data.
    '''
    base = [synth_generate(p, montreal_schedule()) for p in sample_population(base_subjects, seed)]
    total_s = sum(duration for _, duration in montreal_schedule())
    targets = [
        synth_generate(p, everyday_schedule(total_s, seed=p.seed))
        for p in sample_population(target_subjects, seed, shifted=True)
        ]
    return base, targets
