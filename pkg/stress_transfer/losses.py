import numpy as np

from stress_transfer.exceptions import InvalidArgumentError, ShapeError


PROB_FLOOR = 1e-12


def cross_entropy(probs: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    '''
    Loss of one example and the combined softmax + cross-entropy gradient
    with respect to the logits that produced `probs`.
    '''
    probs = np.asarray(probs)
    if probs.ndim != 1:
        raise ShapeError('cross_entropy probabilities', ['classes'], list(probs.shape))
    if not 0 <= label < len(probs):
        raise InvalidArgumentError(f'label {label} out of range for {len(probs)} classes')

    loss = -float(np.log(max(float(probs[label]), PROB_FLOOR)))
    logit_grad = probs.copy()
    logit_grad[label] -= 1
    return loss, logit_grad


def batch_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    '''Mean loss over the batch; the gradient is scaled accordingly.'''
    probs = np.asarray(probs)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or len(probs) != len(labels):
        raise ShapeError('batch probabilities', ['batch', 'classes'], list(probs.shape))

    rows = np.arange(len(labels))
    picked = np.maximum(probs[rows, labels].astype(np.float64), PROB_FLOOR)
    loss = float(-np.log(picked).mean())

    logit_grad = probs.copy()
    logit_grad[rows, labels] -= 1
    logit_grad /= len(labels)
    return loss, logit_grad
