import numpy as np
import pytest
from numpy.testing import assert_array_equal

from conftest import blob_dataset
from stress_transfer import settings
from stress_transfer.container import save_model
from stress_transfer.evaluation import evaluate
from stress_transfer.exceptions import InvalidArgumentError, ProvenanceError, SingleClassError
from stress_transfer.layers import Conv1DLayer, DenseLayer
from stress_transfer.model import TrainConfig, predict_dataset, train
from stress_transfer.transfer import (AdaptationSpec, Provenance, adapt_head, baseline_on_target,
                                      cross_user_matrix, finetune, load_personal_model, parameter_checksum,
                                      save_personal_model, split_user_data, verify_provenance)


@pytest.fixture
def base(tiny_model, blobs):
    train(tiny_model, blobs, TrainConfig(epochs=2))
    return tiny_model


@pytest.fixture
def user_data(short_window):
    return blob_dataset(n=60, window_len=short_window, seed=1, separation=3.)


def spec(**kwargs):
    defaults = {'hidden_width': 8, 'finetune_config': TrainConfig(epochs=3, learning_rate=1e-3)}
    return AdaptationSpec(**{**defaults, **kwargs})


def conv_indices(model):
    return [i for i, layer in enumerate(model.layers) if isinstance(layer, Conv1DLayer)]


def test_adapt_head_replaces_the_classifier(base):
    personal = adapt_head(base, spec(hidden_width=12))
    model = personal.model
    flatten_dim = base.layer_shapes()[9][0]

    assert len(model.layers) == len(base.layers)
    hidden, output = model.layers[11], model.layers[13]
    assert isinstance(hidden, DenseLayer) and isinstance(output, DenseLayer)
    assert (hidden.in_units, hidden.out_units) == (flatten_dim, 12)
    assert (output.in_units, output.out_units) == (12, settings.CLASS_COUNT)

    new_params = sum(layer.parameter_count for layer in model.layers[11:])
    assert new_params == flatten_dim * 12 + 12 + 12 * 2 + 2
    assert model.norm_stats == base.norm_stats


def test_convolutions_are_frozen_by_default(base):
    personal = adapt_head(base, spec())
    frozen = [i for i, flag in enumerate(personal.model.frozen_flags) if flag]
    assert frozen == conv_indices(base)
    assert personal.provenance.frozen_layers == tuple(conv_indices(base))
    assert not any(base.frozen_flags)


def test_adaptation_copies_the_body(base):
    personal = adapt_head(base, spec())
    personal.model.layers[0].params['weights'][:] = 0
    assert base.layers[0].params['weights'].any()


def test_invalid_freeze_policy(base):
    with pytest.raises(InvalidArgumentError, match='99'):
        adapt_head(base, spec(freeze_policy={0, 99}))
    with pytest.raises(InvalidArgumentError):
        AdaptationSpec(hidden_width=0)


def test_custom_freeze_policy(base):
    personal = adapt_head(base, spec(freeze_policy={0}))
    assert personal.model.frozen_flags[0]
    assert not personal.model.frozen_flags[3]


def test_finetune_keeps_frozen_layers_bit_identical(base, user_data):
    before = parameter_checksum(base, conv_indices(base))
    tuned, report = finetune(adapt_head(base, spec()), user_data, user_id='user_1')

    assert parameter_checksum(tuned.model, conv_indices(base)) == before
    for i in conv_indices(base):
        assert_array_equal(tuned.model.layers[i].params['weights'], base.layers[i].params['weights'])
    verify_provenance(tuned, base)
    assert tuned.provenance.user_id == 'user_1'
    assert report.holdout is not None
    assert report.holdout.n == len(split_user_data(user_data)[1])


def test_finetune_refits_normalisation_on_user_data(base, user_data):
    tuned, _ = finetune(adapt_head(base, spec()), user_data)
    train_set, _ = split_user_data(user_data)
    expected = train_set.windows.astype(np.float64).mean(axis=(0, 2))
    np.testing.assert_allclose(tuned.norm_stats.mean, expected, rtol=1e-5)


def test_zero_epoch_finetune_leaves_predictions_unchanged(base, user_data):
    personal = adapt_head(base, spec())
    tuned, report = finetune(personal, user_data, TrainConfig(epochs=0))
    for a, b in zip(personal.model.layers, tuned.model.layers):
        for name in a.params:
            assert_array_equal(a.params[name], b.params[name])
    assert report.epoch_losses == []

    assert tuned.norm_stats == personal.norm_stats
    labels, probs = predict_dataset(tuned.model, user_data)
    expected_labels, expected_probs = predict_dataset(personal.model, user_data)
    assert_array_equal(labels, expected_labels)
    assert_array_equal(probs, expected_probs)


def test_finetune_does_not_touch_the_input_model(base, user_data):
    personal = adapt_head(base, spec())
    head = personal.model.layers[-2].params['weights'].copy()
    finetune(personal, user_data)
    assert_array_equal(personal.model.layers[-2].params['weights'], head)


def test_single_class_user_data_is_refused(base, user_data):
    relaxed = user_data.subset(np.flatnonzero(user_data.labels == settings.RELAXED))
    with pytest.raises(SingleClassError, match='label more data'):
        finetune(adapt_head(base, spec()), relaxed)


def test_personal_model_round_trip(base, user_data, tmp_path):
    tuned, _ = finetune(adapt_head(base, spec()), user_data, user_id='user_2')
    path = save_personal_model(tuned, tmp_path / 'personal_user_2.strscnn')
    loaded = load_personal_model(path)

    assert loaded.provenance == tuned.provenance
    assert loaded.model.frozen_flags == tuned.model.frozen_flags
    assert loaded.train_config().epochs == 3
    verify_provenance(loaded, base)


def test_base_model_has_no_provenance(base, tmp_path):
    path = save_model(base, base.norm_stats, tmp_path / 'base.strscnn')
    with pytest.raises(ProvenanceError):
        load_personal_model(path)


def test_provenance_detects_another_base(base):
    personal = adapt_head(base, spec())
    other_base = base.copy()
    other_base.layers[0].params['weights'][0, 0, 0] += 1.
    with pytest.raises(ProvenanceError, match='not the one'):
        verify_provenance(personal, other_base)

    personal.model.layers[3].params['bias'][0] += 1.
    with pytest.raises(ProvenanceError, match='differ'):
        verify_provenance(personal, base)


def test_malformed_provenance():
    with pytest.raises(ProvenanceError):
        Provenance.from_dict({'base_checksum': 'abc'})


def test_baseline_on_target_uses_base_statistics(base, user_data):
    report = baseline_on_target(base, user_data)
    assert report.n == len(user_data)
    assert report == evaluate(base, user_data)


def test_one_by_one_cross_user_matrix(base, user_data):
    tuned, _ = finetune(adapt_head(base, spec()), user_data)
    matrix = cross_user_matrix([tuned], [user_data])
    assert matrix.shape == (1, 1)
    _, test_set = split_user_data(user_data)
    assert matrix[0, 0] == pytest.approx(evaluate(tuned.model, test_set).accuracy)


def test_cross_user_matrix_needs_inputs(base, user_data):
    with pytest.raises(InvalidArgumentError):
        cross_user_matrix([], [user_data])


def test_split_user_data_holds_out_a_fifth(user_data):
    train_set, test_set = split_user_data(user_data)
    assert len(test_set) == 12
    assert len(train_set) == 48
    assert set(test_set.labels.tolist()) == {settings.RELAXED, settings.STRESSED}
