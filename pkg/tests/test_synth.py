import numpy as np
import pytest
from numpy.testing import assert_array_equal

from stress_transfer import settings
from stress_transfer.exceptions import InvalidArgumentError
from stress_transfer.items import SubjectProfile
from stress_transfer.synth import (BASE_MEAN, BASE_RESPONSE, STRESS_SHIFT_MEAN, TARGET_RESPONSES,
                                   everyday_schedule, montreal_schedule, sample_population, synth_corpus,
                                   synth_generate)


PROFILE = SubjectProfile(
    baseline=(75., 45., 350.),
    stress_shift=(5., -10., -30.),
    noise_scale=(3., 5., 50.),
    seed=11,
    subject_id='subject_x',
    )


def test_sixty_seconds_at_thirty_hertz():
    session = synth_generate(PROFILE, [('relaxed', 30.), ('stressed', 30.)])
    assert len(session) == 1800
    assert session.timestamp_ms[:4].tolist() == [0, 33, 67, 100]
    assert session.timestamp_ms[-1] == round(1799 * 1000 / 30)
    assert (session.labels[:900] == settings.RELAXED).all()
    assert (session.labels[900:] == settings.STRESSED).all()


def test_generation_is_deterministic():
    a = synth_generate(PROFILE, montreal_schedule())
    b = synth_generate(PROFILE, montreal_schedule())
    assert_array_equal(a.values, b.values)
    assert_array_equal(a.labels, b.labels)


def test_values_are_physiologically_valid():
    session = synth_generate(PROFILE, montreal_schedule())
    assert (session.values[:, 0] > 0).all()
    assert (session.values[:, 1:] >= 0).all()


def test_montreal_schedule_lasts_twenty_two_minutes():
    schedule = montreal_schedule()
    assert sum(d for _, d in schedule) == 1320.
    assert [p for p, _ in schedule].count('stressed') == 1
    assert len(synth_generate(PROFILE, schedule)) == 1320 * 30


def test_everyday_schedule_alternates_and_fills_total():
    schedule = everyday_schedule(1320., seed=4)
    assert sum(d for _, d in schedule) == pytest.approx(1320.)
    phases = [p for p, _ in schedule]
    assert phases[0] == 'relaxed'
    assert all(a != b for a, b in zip(phases, phases[1:]))
    assert 'stressed' in phases


@pytest.mark.parametrize('schedule', [[], [('bored', 10.)], [('relaxed', 0.)], [('stressed', -5.)]])
def test_invalid_schedules(schedule):
    with pytest.raises(InvalidArgumentError):
        synth_generate(PROFILE, schedule)


def test_population_ids_and_exact_means():
    population = sample_population(20, seed=2)
    assert [p.subject_id for p in population][:2] == ['subject_01', 'subject_02']
    baselines = np.array([p.baseline for p in population])
    shifts = np.array([p.stress_shift for p in population])
    np.testing.assert_allclose(baselines.mean(axis=0), BASE_MEAN, atol=1e-9)
    np.testing.assert_allclose(shifts.mean(axis=0), STRESS_SHIFT_MEAN, atol=1e-9)


def test_target_users_reverse_two_channel_responses():
    targets = sample_population(3, seed=0, shifted=True)
    assert [t.subject_id for t in targets] == ['user_1', 'user_2', 'user_3']

    signs = {tuple(int(s) for s in np.sign(t.stress_shift)) for t in targets}
    assert signs == set(TARGET_RESPONSES)
    for pattern in signs:
        assert sum(a != b for a, b in zip(pattern, BASE_RESPONSE)) == 2


def test_pooled_cohort_matches_calibration():
    base, _ = synth_corpus(base_subjects=20, target_subjects=1, seed=0)
    values = np.concatenate([s.values for s in base])
    labels = np.concatenate([s.labels for s in base])
    relaxed = values[labels == settings.RELAXED].mean(axis=0)
    stressed = values[labels == settings.STRESSED].mean(axis=0)

    assert relaxed[0] == pytest.approx(76.8, abs=1.)
    assert relaxed[1] == pytest.approx(45., abs=2.)
    assert relaxed[2] == pytest.approx(351.9, abs=10.)
    assert stressed[0] - relaxed[0] == pytest.approx(4.4, abs=1.)
    assert stressed[1] - relaxed[1] == pytest.approx(-12., abs=1.5)
    assert stressed[2] - relaxed[2] == pytest.approx(-34.7, abs=12.)


def test_stress_raises_heart_rate_noise():
    base, _ = synth_corpus(base_subjects=10, target_subjects=1, seed=1)
    ratios = []
    for session in base:
        steps = np.diff(session.values[:, 0])
        same = session.labels[1:] == session.labels[:-1]
        stressed = steps[same & (session.labels[1:] == settings.STRESSED)].std()
        relaxed = steps[same & (session.labels[1:] == settings.RELAXED)].std()
        ratios.append(stressed / relaxed)
    assert np.mean(ratios) == pytest.approx(1.9, rel=0.15)


def test_corpus_sizes_and_labels():
    base, targets = synth_corpus(base_subjects=2, target_subjects=2, seed=5)
    assert [s.subject_id for s in base] == ['subject_01', 'subject_02']
    assert [s.subject_id for s in targets] == ['user_1', 'user_2']
    assert all(len(s) == 1320 * 30 for s in base + targets)
    for session in targets:
        assert set(np.unique(session.labels).tolist()) == {settings.RELAXED, settings.STRESSED}
