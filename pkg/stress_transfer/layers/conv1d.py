import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base_layer import BaseLayer, expect_channels, he_uniform
from ..exceptions import InvalidArgumentError, ShapeError


class Conv1DLayer(BaseLayer):
    name = 'conv1d'
    tag = 1
    sample_ndim = 2

    def __init__(
            self,
            in_channels: int,
            out_channels: int,
            kernel_size: int,
            stride: int = 1,
            rng: np.random.Generator | None = None,
            ):
        BaseLayer.__init__(self)
        if min(in_channels, out_channels, kernel_size, stride) < 1:
            raise InvalidArgumentError(
                f'conv1d needs positive sizes, got in={in_channels} out={out_channels} '
                f'kernel={kernel_size} stride={stride}')

        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride

        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel_size
        self.params['weights'] = he_uniform(rng, (out_channels, in_channels, kernel_size), fan_in)
        self.params['bias'] = np.zeros(out_channels, dtype=np.float32)

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        channels, length = input_shape
        if channels != self.in_channels:
            raise ShapeError(f'{self.name} input', [self.in_channels, length], list(input_shape))
        if length < self.kernel_size:
            raise ShapeError(f'{self.name} input length', f'>= {self.kernel_size}', length)
        return (self.out_channels, (length - self.kernel_size) // self.stride + 1)

    def hyperparameters(self) -> dict:
        return {
            'in_channels': self.in_channels,
            'out_channels': self.out_channels,
            'kernel_size': self.kernel_size,
            'stride': self.stride,
            }

    def _columns(self, x: np.ndarray) -> np.ndarray:
        # [B, C, L_out, K] view, no copy
        return sliding_window_view(x, self.kernel_size, axis=2)[:, :, ::self.stride, :]

    def _forward(self, x: np.ndarray):
        expect_channels(self, x, self.in_channels)
        self.output_shape(x.shape[1:])

        cols = self._columns(x)
        out = np.tensordot(cols, self.params['weights'], axes=([1, 3], [1, 2]))  # [B, L_out, O]
        out = out.transpose(0, 2, 1) + self.params['bias'][:, None]
        return np.ascontiguousarray(out), x

    def _backward(self, upstream: np.ndarray, x: np.ndarray) -> np.ndarray:
        weights = self.params['weights']
        cols = self._columns(x)
        out_len = upstream.shape[2]

        self.grads['weights'] = np.tensordot(upstream, cols, axes=([0, 2], [0, 2]))
        self.grads['bias'] = upstream.sum(axis=(0, 2))

        # each tap k scatters into positions k, k + stride, ...
        taps = np.tensordot(upstream, weights, axes=([1], [0]))  # [B, L_out, C, K]
        input_grad = np.zeros_like(x)
        span = self.stride * (out_len - 1) + 1
        for k in range(self.kernel_size):
            input_grad[:, :, k:k + span:self.stride] += taps[:, :, :, k].transpose(0, 2, 1)

        return input_grad


def conv1d_forward(layer: Conv1DLayer, x: np.ndarray) -> np.ndarray:
    return layer.forward(x)


def conv1d_backward(
        layer: Conv1DLayer,
        x: np.ndarray,
        upstream: np.ndarray,
        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    Gradients of the last training forward pass on `x`. Frozen layers still
    report parameter gradients; the optimizer is what ignores them.
    '''
    cached = layer._cache
    if cached is not None and cached.shape[1:] != np.shape(x)[-2:]:
        raise ShapeError(f'{layer.name} backward input', list(cached.shape[1:]), list(np.shape(x)))
    input_grad = layer.backward(upstream)
    return input_grad, layer.grads['weights'], layer.grads['bias']
