import numpy as np

from stress_transfer.exceptions import CacheError, ShapeError


class BaseLayer:
    '''
    Common behaviour of every layer: batch handling, forward caches and the
    frozen flag.

    Subclasses implement `_forward(x) -> (output, cache)` and
    `_backward(upstream, cache) -> input_grad` on batch-first arrays, filling
    `self.grads` with one gradient per entry of `self.params`.
    '''
    name = 'base'
    tag = 0
    # rank of a single example; None for elementwise layers
    sample_ndim: int | None = None

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.frozen = False
        # caches are recorded only in training mode
        self.training = True
        self._cache = None
        self._unbatched = False
        self._out_shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        unbatched = self.sample_ndim is not None and x.ndim == self.sample_ndim
        if unbatched:
            x = x[None]

        out, cache = self._forward(x)
        if self.training:
            self._cache = cache
            self._unbatched = unbatched
            self._out_shape = out.shape

        return out[0] if unbatched else out

    def infer(self, x: np.ndarray) -> np.ndarray:
        '''Forward pass that touches no layer state.'''
        x = np.asarray(x)
        unbatched = self.sample_ndim is not None and x.ndim == self.sample_ndim
        out, _ = self._forward(x[None] if unbatched else x)
        return out[0] if unbatched else out

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise CacheError(f'{self.name}: backward called without a cached training forward pass')

        upstream = np.asarray(upstream)
        if self._unbatched:
            upstream = upstream[None]
        if upstream.shape != self._out_shape:
            raise ShapeError(f'{self.name} upstream gradient', list(self._out_shape), list(upstream.shape))

        grad = self._backward(upstream, self._cache)
        return grad[0] if self._unbatched else grad

    def clear_cache(self) -> None:
        self._cache = None
        self._out_shape = None

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        '''Shape of one output example for one input example of `input_shape`.'''
        return tuple(input_shape)

    def hyperparameters(self) -> dict:
        return {}

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def astype(self, dtype) -> 'BaseLayer':
        for key, value in self.params.items():
            self.params[key] = value.astype(dtype)
        self.grads = {}
        self.clear_cache()
        return self

    def _forward(self, x: np.ndarray):
        raise NotImplementedError

    def _backward(self, upstream: np.ndarray, cache) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        args = ', '.join(f'{k}={v}' for k, v in self.hyperparameters().items())
        frozen = ', frozen' if self.frozen else ''
        return f'{type(self).__name__}({args}{frozen})'


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(6. / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


def expect_channels(layer: BaseLayer, x: np.ndarray, channels: int) -> None:
    if x.ndim != 3 or x.shape[1] != channels:
        raise ShapeError(f'{layer.name} input', ['batch', channels, 'length'], list(x.shape))
