import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base_layer import BaseLayer
from ..exceptions import InvalidArgumentError, ShapeError


class MaxPool1DLayer(BaseLayer):
    '''Channel-wise max over sliding windows; ties go to the first index.'''
    name = 'maxpool1d'
    tag = 2
    sample_ndim = 2

    def __init__(self, pool_size: int, stride: int | None = None):
        BaseLayer.__init__(self)
        stride = pool_size if stride is None else stride
        if pool_size < 1 or stride < 1:
            raise InvalidArgumentError(f'maxpool1d needs positive sizes, got pool={pool_size} stride={stride}')
        self.pool_size = pool_size
        self.stride = stride

    @property
    def argmax_cache(self) -> np.ndarray | None:
        return None if self._cache is None else self._cache[1]

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        channels, length = input_shape
        if length < self.pool_size:
            raise ShapeError(f'{self.name} input length', f'>= {self.pool_size}', length)
        return (channels, (length - self.pool_size) // self.stride + 1)

    def hyperparameters(self) -> dict:
        return {'pool_size': self.pool_size, 'stride': self.stride}

    def _forward(self, x: np.ndarray):
        if x.ndim != 3:
            raise ShapeError(f'{self.name} input', ['batch', 'channels', 'length'], list(x.shape))
        self.output_shape(x.shape[1:])

        windows = sliding_window_view(x, self.pool_size, axis=2)[:, :, ::self.stride, :]
        argmax = windows.argmax(axis=3)
        out = np.take_along_axis(windows, argmax[..., None], axis=3)[..., 0]
        return np.ascontiguousarray(out), (x.shape, argmax)

    def _backward(self, upstream: np.ndarray, cache) -> np.ndarray:
        input_shape, argmax = cache
        positions = argmax + np.arange(argmax.shape[2]) * self.stride
        input_grad = np.zeros(input_shape, dtype=upstream.dtype)

        if self.stride >= self.pool_size:
            # windows do not overlap, every position receives at most one gradient
            np.put_along_axis(input_grad, positions, upstream, axis=2)
        else:
            batch, channels, _ = np.indices(positions.shape)
            np.add.at(input_grad, (batch, channels, positions), upstream)

        return input_grad


def maxpool1d_forward(layer: MaxPool1DLayer, x: np.ndarray) -> np.ndarray:
    return layer.forward(x)


def maxpool1d_backward(layer: MaxPool1DLayer, upstream: np.ndarray) -> np.ndarray:
    return layer.backward(upstream)
