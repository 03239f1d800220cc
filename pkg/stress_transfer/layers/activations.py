import numpy as np

from .base_layer import BaseLayer
from ..exceptions import ShapeError


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    # zero gradient at exactly 0
    return np.where(np.asarray(x) > 0, upstream, 0).astype(np.result_type(upstream), copy=False)


def softmax(logits: np.ndarray) -> np.ndarray:
    '''Softmax over the last axis, shifted by the max for stability.'''
    logits = np.asarray(logits)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return probs * (upstream - (upstream * probs).sum(axis=-1, keepdims=True))


class ReLULayer(BaseLayer):
    name = 'relu'
    tag = 3

    def _forward(self, x: np.ndarray):
        return relu_forward(x), x

    def _backward(self, upstream: np.ndarray, x: np.ndarray) -> np.ndarray:
        return relu_backward(x, upstream)


class FlattenLayer(BaseLayer):
    name = 'flatten'
    tag = 4
    sample_ndim = 2

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        return (int(np.prod(input_shape)),)

    def _forward(self, x: np.ndarray):
        if x.ndim < 2:
            raise ShapeError(f'{self.name} input', ['batch', '...'], list(x.shape))
        return x.reshape(len(x), -1), x.shape

    def _backward(self, upstream: np.ndarray, input_shape) -> np.ndarray:
        return upstream.reshape(input_shape)


class SoftmaxLayer(BaseLayer):
    name = 'softmax'
    tag = 7

    def _forward(self, x: np.ndarray):
        probs = softmax(x)
        return probs, probs

    def _backward(self, upstream: np.ndarray, probs: np.ndarray) -> np.ndarray:
        return softmax_backward(probs, upstream)
