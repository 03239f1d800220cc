import numpy as np

from .base_layer import BaseLayer, he_uniform
from ..exceptions import InvalidArgumentError, ShapeError


class DenseLayer(BaseLayer):
    name = 'dense'
    tag = 6
    sample_ndim = 1

    def __init__(self, in_units: int, out_units: int, rng: np.random.Generator | None = None):
        BaseLayer.__init__(self)
        if in_units < 1 or out_units < 1:
            raise InvalidArgumentError(f'dense needs positive sizes, got in={in_units} out={out_units}')
        self.in_units = in_units
        self.out_units = out_units

        rng = rng if rng is not None else np.random.default_rng(0)
        self.params['weights'] = he_uniform(rng, (out_units, in_units), in_units)
        self.params['bias'] = np.zeros(out_units, dtype=np.float32)

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        if tuple(input_shape) != (self.in_units,):
            raise ShapeError(f'{self.name} input', [self.in_units], list(input_shape))
        return (self.out_units,)

    def hyperparameters(self) -> dict:
        return {'in_units': self.in_units, 'out_units': self.out_units}

    def _forward(self, x: np.ndarray):
        if x.ndim != 2 or x.shape[1] != self.in_units:
            raise ShapeError(f'{self.name} input', ['batch', self.in_units], list(x.shape))
        out = x @ self.params['weights'].T + self.params['bias']
        return out, x

    def _backward(self, upstream: np.ndarray, x: np.ndarray) -> np.ndarray:
        self.grads['weights'] = upstream.T @ x
        self.grads['bias'] = upstream.sum(axis=0)
        return upstream @ self.params['weights']


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    return layer.forward(x)


def dense_backward(
        layer: DenseLayer,
        x: np.ndarray,
        upstream: np.ndarray,
        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cached = layer._cache
    if cached is not None and cached.shape[-1] != np.shape(x)[-1]:
        raise ShapeError(f'{layer.name} backward input', [cached.shape[-1]], list(np.shape(x)))
    input_grad = layer.backward(upstream)
    return input_grad, layer.grads['weights'], layer.grads['bias']
