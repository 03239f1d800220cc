# Central finite-difference checks of the analytic gradients.
#
# Checks run in float64 on a deep copy of the target so float32 rounding does
# not swamp the 1e-3 perturbation, and the caller's model stays untouched.

import copy
import logging

import numpy as np

from stress_transfer.exceptions import InvalidArgumentError
from stress_transfer.layers import BaseLayer, DropoutLayer
from stress_transfer.losses import batch_cross_entropy


_logger = logging.getLogger(__name__)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def _prepare(target):
    target = copy.deepcopy(target)
    target.astype(np.float64)
    if isinstance(target, BaseLayer):
        target.training = True
        if isinstance(target, DropoutLayer):
            target.mode = 'inference'
    else:
        target.set_training(True, dropout=False)
    return target


def _entries(shape: tuple[int, ...], max_checks: int | None, rng: np.random.Generator):
    size = int(np.prod(shape))
    if max_checks is None or size <= max_checks:
        flat = np.arange(size)
    else:
        flat = np.sort(rng.choice(size, size=max_checks, replace=False))
    return [np.unravel_index(i, shape) for i in flat]


def grad_check(
        target,
        x: np.ndarray,
        label: int | np.ndarray = 0,
        eps: float = 1e-3,
        *,
        atol: float = 0.,
        max_checks: int | None = None,
        seed: int = 0,
        ) -> float:
    '''
    Max relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    over every parameter entry and every input entry of `target`.

    A layer is checked through the scalar loss sum(output * R) for a fixed
    random R; a network (anything with `layers`) through the cross-entropy of
    its softmax output against `label`. Entries whose absolute disagreement is
    at most `atol` count as exact, and `max_checks` samples at most that many
    entries per tensor.
    '''
    if not eps > 0:
        raise InvalidArgumentError(f'finite-difference step must be positive, got {eps}')

    rng = np.random.default_rng(seed)
    target = _prepare(target)
    x = np.array(x, dtype=np.float64)
    is_layer = isinstance(target, BaseLayer)

    if is_layer:
        weights = rng.uniform(-1., 1., size=np.shape(target.infer(x)))

        def loss_fn() -> float:
            return float((target.infer(x) * weights).sum())

        target.forward(x)
        input_grad = target.backward(weights)
        tensors = [(f'{target.name}.{k}', v, target.grads[k]) for k, v in target.params.items()]
    else:
        single = x.ndim == len(target.input_shape)
        inputs = x[None] if single else x
        labels = np.broadcast_to(np.asarray(label, dtype=np.int64), (len(inputs),))

        def loss_fn() -> float:
            return batch_cross_entropy(target.infer(inputs), labels)[0] * len(labels)

        probs = target.forward(inputs)
        _, logit_grad = batch_cross_entropy(probs, labels)
        input_grad = target.backward(logit_grad * len(labels), full=True)
        if single:
            input_grad = input_grad[0]
        tensors = [
            (f'{i}.{layer.name}.{k}', v, layer.grads[k])
            for i, layer in enumerate(target.layers)
            for k, v in layer.params.items()
            ]

    # the input itself is perturbed in place through `x`
    tensors.append(('input', x, input_grad))

    worst = 0.
    for name, values, analytic in tensors:
        for index in _entries(values.shape, max_checks, rng):
            original = values[index]
            values[index] = original + eps
            plus = loss_fn()
            values[index] = original - eps
            minus = loss_fn()
            values[index] = original

            numeric = (plus - minus) / (2 * eps)
            if abs(analytic[index] - numeric) <= atol:
                continue
            error = relative_error(float(analytic[index]), numeric)
            if error > worst:
                _logger.debug(f'{name}{list(index)}: analytic {analytic[index]:.6g} numeric {numeric:.6g}')
                worst = error

    return worst
