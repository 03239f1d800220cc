import numpy as np

from .base_layer import BaseLayer
from ..exceptions import InvalidArgumentError


class DropoutLayer(BaseLayer):
    '''
    Inverted dropout: in 'train' mode every value is zeroed with probability
    `rate` and survivors are scaled by 1 / (1 - rate), so 'inference' mode is
    the identity.
    '''
    name = 'dropout'
    tag = 5
    modes = ('train', 'inference')

    def __init__(self, rate: float, mode: str = 'inference'):
        BaseLayer.__init__(self)
        if not 0. <= rate < 1.:
            raise InvalidArgumentError(f'dropout rate must be in [0, 1), got {rate}')
        self.rate = float(rate)
        self.mode = mode

    @property
    def mode(self) -> str:
        return self._mode

    @mode.setter
    def mode(self, value: str) -> None:
        if value not in self.modes:
            raise InvalidArgumentError(f'dropout mode must be one of {self.modes}, got {value!r}')
        self._mode = value

    @property
    def mask_cache(self) -> np.ndarray | None:
        return self._cache

    def hyperparameters(self) -> dict:
        return {'rate': self.rate}

    def forward(self, x: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        x = np.asarray(x)
        if self._mode == 'inference' or self.rate == 0.:
            if self.training:
                self._cache = np.ones(x.shape, dtype=bool)
                self._out_shape = x.shape
                self._unbatched = False
            return x

        if rng is None:
            raise InvalidArgumentError('dropout in train mode needs a random generator')
        mask = rng.random(x.shape) >= self.rate
        out = x * mask * x.dtype.type(1. / (1. - self.rate))
        if self.training:
            self._cache = mask
            self._out_shape = x.shape
            self._unbatched = False
        return out

    def infer(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)

    def _backward(self, upstream: np.ndarray, mask: np.ndarray) -> np.ndarray:
        if self._mode == 'inference' or self.rate == 0.:
            return upstream
        return upstream * mask * upstream.dtype.type(1. / (1. - self.rate))


def dropout_forward(layer: DropoutLayer, x: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    return layer.forward(x, rng)
