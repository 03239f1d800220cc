import logging
from dataclasses import dataclass, field

import numpy as np

from stress_transfer import settings
from stress_transfer.exceptions import InvalidArgumentError, ShapeError


_logger = logging.getLogger(__name__)

OPTIMIZER_KINDS = ('sgd', 'adam')


@dataclass
class OptimizerState:
    '''
    Update rules, applied in place:

    - sgd:  v <- momentum * v + g;  w <- w - lr * v   (momentum 0 is plain SGD)
    - adam: m <- b1 * m + (1 - b1) * g;  s <- b2 * s + (1 - b2) * g^2;
            w <- w - lr * m_hat / (sqrt(s_hat) + eps) with bias-corrected m_hat, s_hat
    '''
    kind: str = 'sgd'
    learning_rate: float = settings.LEARNING_RATE
    momentum: float = settings.MOMENTUM
    beta1: float = settings.ADAM_BETAS[0]
    beta2: float = settings.ADAM_BETAS[1]
    eps: float = settings.ADAM_EPS
    step_count: int = 0
    accumulators: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise InvalidArgumentError(f'optimizer must be one of {OPTIMIZER_KINDS}, got {self.kind!r}')
        if self.learning_rate < 0:
            raise InvalidArgumentError(f'learning rate must be non-negative, got {self.learning_rate}')
        if not 0 <= self.momentum < 1:
            raise InvalidArgumentError(f'momentum must be in [0, 1), got {self.momentum}')

    def _slot(self, key: str, name: str, param: np.ndarray) -> np.ndarray:
        slots = self.accumulators.setdefault(key, {})
        if name not in slots:
            slots[name] = np.zeros_like(param)
        elif slots[name].shape != param.shape:
            raise ShapeError(f'optimizer accumulator {key}/{name}', list(param.shape), list(slots[name].shape))
        return slots[name]

    def step(
            self,
            params: dict[str, np.ndarray],
            grads: dict[str, np.ndarray],
            frozen: frozenset[str] = frozenset(),
            ) -> dict[str, np.ndarray]:
        self.step_count += 1
        lr = self.learning_rate

        for key, param in params.items():
            if key in frozen:
                _logger.debug(f'Skipping frozen parameter {key}')
                continue
            grad = grads[key]
            if grad.shape != param.shape:
                raise ShapeError(f'gradient of {key}', list(param.shape), list(grad.shape))

            if self.kind == 'sgd':
                velocity = self._slot(key, 'velocity', param)
                velocity *= self.momentum
                velocity += grad
                param -= lr * velocity
            else:
                m = self._slot(key, 'm', param)
                s = self._slot(key, 's', param)
                m *= self.beta1
                m += (1 - self.beta1) * grad
                s *= self.beta2
                s += (1 - self.beta2) * grad * grad
                m_hat = m / (1 - self.beta1 ** self.step_count)
                s_hat = s / (1 - self.beta2 ** self.step_count)
                param -= lr * m_hat / (np.sqrt(s_hat) + self.eps)

        return params


def optimizer_step(
        state: OptimizerState,
        params: dict[str, np.ndarray],
        grads: dict[str, np.ndarray],
        frozen: frozenset[str] = frozenset(),
        ) -> dict[str, np.ndarray]:
    return state.step(params, grads, frozen)
