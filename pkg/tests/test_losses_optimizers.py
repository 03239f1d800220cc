import numpy as np
import pytest
from numpy.testing import assert_allclose

from stress_transfer.exceptions import InvalidArgumentError, ShapeError
from stress_transfer.layers import softmax
from stress_transfer.losses import batch_cross_entropy, cross_entropy
from stress_transfer.optimizers import OptimizerState, optimizer_step


def test_softmax_of_small_logits():
    assert_allclose(softmax(np.array([1., 2.])), [0.26894, 0.73106], atol=1e-4)


def test_cross_entropy_of_uniform_probabilities():
    loss, grad = cross_entropy(np.array([0.5, 0.5]), 1)
    assert loss == pytest.approx(np.log(2), abs=1e-4)
    assert_allclose(grad, [0.5, -0.5])


def test_cross_entropy_clamps_zero_probability():
    loss, _ = cross_entropy(np.array([1., 0.]), 1)
    assert loss == pytest.approx(-np.log(1e-12))


def test_cross_entropy_logit_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    eps = 1e-3
    for _ in range(20):
        logits = rng.uniform(-3., 3., size=2)
        label = int(rng.integers(2))
        _, grad = cross_entropy(softmax(logits), label)
        for i in range(2):
            shift = np.zeros(2)
            shift[i] = eps
            numeric = (cross_entropy(softmax(logits + shift), label)[0]
                       - cross_entropy(softmax(logits - shift), label)[0]) / (2 * eps)
            assert grad[i] == pytest.approx(numeric, rel=1e-3, abs=1e-7)


def test_cross_entropy_rejects_bad_label():
    with pytest.raises(InvalidArgumentError):
        cross_entropy(np.array([0.5, 0.5]), 2)
    with pytest.raises(ShapeError):
        cross_entropy(np.array([[0.5, 0.5]]), 0)


def test_batch_cross_entropy_averages():
    probs = np.array([[0.5, 0.5], [0.9, 0.1]])
    loss, grad = batch_cross_entropy(probs, np.array([0, 0]))
    assert loss == pytest.approx((np.log(2) - np.log(0.9)) / 2)
    assert_allclose(grad, [[-0.25, 0.25], [-0.05, 0.05]])


def test_plain_sgd_step():
    optimizer = OptimizerState('sgd', learning_rate=0.1, momentum=0.)
    params = optimizer_step(optimizer, {'w': np.array([1.])}, {'w': np.array([0.5])})
    assert params['w'][0] == pytest.approx(0.95)


def test_momentum_unrolls_by_hand():
    optimizer = OptimizerState('sgd', learning_rate=0.1, momentum=0.9)
    params = {'w': np.array([1.])}
    grads = {'w': np.array([0.5])}

    optimizer.step(params, grads)
    assert params['w'][0] == pytest.approx(0.95)
    # v = 0.9 * 0.5 + 0.5 = 0.95
    optimizer.step(params, grads)
    assert params['w'][0] == pytest.approx(0.855)


def test_zero_learning_rate_leaves_weights():
    optimizer = OptimizerState('sgd', learning_rate=0.)
    params = {'w': np.array([1., -2.])}
    optimizer.step(params, {'w': np.array([3., 4.])})
    assert_allclose(params['w'], [1., -2.])


def test_adam_first_step_moves_by_learning_rate():
    optimizer = OptimizerState('adam', learning_rate=0.01)
    params = {'w': np.array([1., 1.])}
    optimizer.step(params, {'w': np.array([0.3, -5.])})
    assert_allclose(params['w'], [0.99, 1.01], atol=1e-6)


def test_frozen_keys_are_skipped():
    optimizer = OptimizerState('sgd', learning_rate=0.1)
    params = {'a': np.array([1.]), 'b': np.array([1.])}
    optimizer.step(params, {'a': np.array([1.]), 'b': np.array([1.])}, frozen=frozenset({'a'}))
    assert params['a'][0] == 1.
    assert params['b'][0] == pytest.approx(0.9)
    assert 'a' not in optimizer.accumulators


def test_optimizer_validates_arguments():
    with pytest.raises(InvalidArgumentError):
        OptimizerState('rmsprop')
    with pytest.raises(InvalidArgumentError):
        OptimizerState('sgd', momentum=1.)
    with pytest.raises(ShapeError):
        OptimizerState('sgd').step({'w': np.zeros(2)}, {'w': np.zeros(3)})
