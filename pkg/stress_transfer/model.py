import copy
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np
import pandas as pd
from tqdm import tqdm

from stress_transfer import settings
from stress_transfer.exceptions import (InvalidArgumentError, ShapeError, SingleClassError,
                                        TrainingDivergedError, WindowingError)
from stress_transfer.items import NormStats, WindowedDataset
from stress_transfer.layers import (BaseLayer, Conv1DLayer, DenseLayer, DropoutLayer, FlattenLayer,
                                    MaxPool1DLayer, ReLULayer, SoftmaxLayer)
from stress_transfer.losses import batch_cross_entropy
from stress_transfer.optimizers import OptimizerState
from stress_transfer.windowing import apply_normalizer, fit_normalizer, kfold_split

if TYPE_CHECKING:
    from stress_transfer.evaluation import EvalReport


_logger = logging.getLogger(__name__)

# windows per inference chunk, bounds the memory of batched forwards
INFERENCE_CHUNK = 256


class StressNet:
    '''
    Ordered layer stack ending in a softmax over `class_count` classes.

    Training-mode forwards record per-layer caches, so a network being trained
    has a single writer; `infer` never touches layer state and may be shared by
    concurrent readers.
    '''
    def __init__(
            self,
            layers: list[BaseLayer],
            input_shape: tuple[int, int] = (len(settings.CHANNELS), settings.WINDOW_LEN),
            class_count: int = settings.CLASS_COUNT,
            norm_stats: NormStats | None = None,
            ):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.class_count = class_count
        self.norm_stats = norm_stats
        self.layer_shapes()

        if not isinstance(self.layers[-1], SoftmaxLayer):
            raise InvalidArgumentError('the last layer of a StressNet must be a softmax')

    def layer_shapes(self) -> list[tuple[int, ...]]:
        '''Per-example output shape of every layer; raises ShapeError on incompatible neighbours.'''
        shapes = []
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        if shape != (self.class_count,):
            raise ShapeError('network output', [self.class_count], list(shape))
        return shapes

    @property
    def window_len(self) -> int:
        return self.input_shape[1]

    @property
    def frozen_flags(self) -> list[bool]:
        return [layer.frozen for layer in self.layers]

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def index_of(self, layer_type: type) -> int:
        for i, layer in enumerate(self.layers):
            if isinstance(layer, layer_type):
                return i
        raise InvalidArgumentError(f'network has no {layer_type.__name__}')

    def set_training(self, enabled: bool, dropout: bool = True) -> None:
        for layer in self.layers:
            layer.training = enabled
            if not enabled:
                layer.clear_cache()
            if isinstance(layer, DropoutLayer):
                layer.mode = 'train' if enabled and dropout else 'inference'

    def forward(self, x: np.ndarray, rng: np.random.Generator | None = None, start: int = 0) -> np.ndarray:
        for layer in self.layers[start:]:
            if isinstance(layer, DropoutLayer):
                x = layer.forward(x, rng)
            else:
                x = layer.forward(x)
        return x

    def infer(self, x: np.ndarray, start: int = 0, stop: int | None = None) -> np.ndarray:
        for layer in self.layers[start:stop]:
            x = layer.infer(x)
        return x

    def first_trainable(self) -> int | None:
        for i, layer in enumerate(self.layers):
            if layer.params and not layer.frozen:
                return i
        return None

    def frozen_prefix(self) -> int:
        '''Number of leading layers whose output is fixed during training.'''
        stop = self.first_trainable()
        stop = len(self.layers) - 1 if stop is None else stop
        for i, layer in enumerate(self.layers[:stop]):
            if isinstance(layer, DropoutLayer):
                return i
        return stop

    def backward(self, logit_grad: np.ndarray, full: bool = False) -> np.ndarray | None:
        '''
        Back-propagate the gradient of the loss with respect to the logits
        (the input of the final softmax). Stops below the lowest trainable
        layer unless `full` is set, in which case the input gradient is
        returned.
        '''
        lowest = 0 if full else self.first_trainable()
        if lowest is None:
            return None

        grad = logit_grad
        for i in range(len(self.layers) - 2, lowest - 1, -1):
            grad = self.layers[i].backward(grad)
        return grad

    def trainable_parameters(self) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        params, grads = {}, {}
        for i, layer in enumerate(self.layers):
            if layer.frozen:
                continue
            for name, value in layer.params.items():
                params[f'{i}.{name}'] = value
                grads[f'{i}.{name}'] = layer.grads[name]
        return params, grads

    def astype(self, dtype) -> 'StressNet':
        for layer in self.layers:
            layer.astype(dtype)
        return self

    def copy(self) -> 'StressNet':
        clone = copy.deepcopy(self)
        clone.set_training(False)
        return clone

    def __repr__(self) -> str:
        layers = '\n'.join(f'  {i}: {layer!r}' for i, layer in enumerate(self.layers))
        return f'StressNet(input_shape={self.input_shape}, parameters={self.parameter_count})\n{layers}'


def default_layers(
        window_len: int,
        rng: np.random.Generator,
        dropout_rate: float = settings.DROPOUT_RATE,
        hidden_width: int = settings.HIDDEN_WIDTH,
        ) -> list[BaseLayer]:
    channels = len(settings.CHANNELS)
    layers = [
        Conv1DLayer(channels, 16, kernel_size=7, rng=rng),
        ReLULayer(),
        MaxPool1DLayer(4),
        Conv1DLayer(16, 32, kernel_size=5, rng=rng),
        ReLULayer(),
        MaxPool1DLayer(4),
        Conv1DLayer(32, 64, kernel_size=3, rng=rng),
        ReLULayer(),
        MaxPool1DLayer(2),
        FlattenLayer(),
        DropoutLayer(dropout_rate),
        ]
    flatten_dim = _flatten_dim(layers, (channels, window_len))
    return layers + head_layers(flatten_dim, hidden_width, settings.CLASS_COUNT, rng)


def head_layers(in_units: int, hidden_width: int, class_count: int, rng: np.random.Generator) -> list[BaseLayer]:
    return [
        DenseLayer(in_units, hidden_width, rng=rng),
        ReLULayer(),
        DenseLayer(hidden_width, class_count, rng=rng),
        SoftmaxLayer(),
        ]


def _flatten_dim(layers: list[BaseLayer], input_shape: tuple[int, int]) -> int:
    shape = input_shape
    for layer in layers:
        shape = layer.output_shape(shape)
    return int(np.prod(shape))


def minimum_window_len() -> int:
    '''Shortest window the default convolution/pooling stack accepts.'''
    stack = default_layers(1024, np.random.default_rng(0))[:9]
    length = 1
    while True:
        try:
            _flatten_dim(stack, (len(settings.CHANNELS), length))
            return length
        except ShapeError:
            length += 1


def build_base_model(
        window_len: int = settings.WINDOW_LEN,
        seed: int = settings.SEED,
        dropout_rate: float = settings.DROPOUT_RATE,
        hidden_width: int = settings.HIDDEN_WIDTH,
        ) -> StressNet:
    '''
    Conv1D(3->16, k7) ReLU MaxPool(4) Conv1D(16->32, k5) ReLU MaxPool(4)
    Conv1D(32->64, k3) ReLU MaxPool(2) Flatten Dropout(0.3)
    Dense(->160) ReLU Dense(160->2) Softmax, initialised from `seed`.
    '''
    rng = np.random.default_rng(seed)
    try:
        layers = default_layers(window_len, rng, dropout_rate, hidden_width)
    except ShapeError as e:
        raise WindowingError(
            f'window length {window_len} is too short for the network, '
            f'minimum supported length is {minimum_window_len()}') from e

    model = StressNet(layers, input_shape=(len(settings.CHANNELS), window_len))
    model.set_training(False)
    _logger.debug(f'Built base model with {model.parameter_count} parameters')
    return model


@dataclass
class TrainConfig:
    epochs: int = settings.EPOCHS
    batch_size: int = settings.BATCH_SIZE
    learning_rate: float = settings.LEARNING_RATE
    optimizer: str = 'sgd'
    momentum: float = settings.MOMENTUM
    beta1: float = settings.ADAM_BETAS[0]
    beta2: float = settings.ADAM_BETAS[1]
    seed: int = settings.SEED
    shuffle: bool = True
    progress: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidArgumentError(f'epochs must be non-negative, got {self.epochs}')
        if self.batch_size < 1:
            raise InvalidArgumentError(f'batch size must be positive, got {self.batch_size}')
        if not self.learning_rate > 0:
            raise InvalidArgumentError(f'learning rate must be positive, got {self.learning_rate}')

    def optimizer_state(self) -> OptimizerState:
        return OptimizerState(
            kind=self.optimizer,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            beta1=self.beta1,
            beta2=self.beta2,
            )

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != 'progress'}


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    epoch_accuracies: list[float] = field(default_factory=list)
    fold_accuracies: list[float] = field(default_factory=list)
    wall_time_s: float = 0.
    # held-out evaluation, filled in by fine-tuning
    holdout: 'EvalReport | None' = None

    @property
    def mean_cv_accuracy(self) -> float | None:
        if not self.fold_accuracies:
            return None
        return float(np.mean(self.fold_accuracies))


def _check_trainable(dataset: WindowedDataset) -> None:
    if len(dataset) == 0:
        raise InvalidArgumentError('cannot train on an empty dataset')
    if np.any(dataset.labels == settings.UNLABELED):
        raise InvalidArgumentError('training windows must all be labelled')
    classes = np.unique(dataset.labels)
    if len(classes) < 2:
        raise SingleClassError(
            f'dataset {dataset.subject_id!r} only holds {settings.CLASS_NAMES[int(classes[0])]} windows, '
            'both classes are needed to train')


def _chunked_infer(model: StressNet, windows: np.ndarray, start: int = 0, stop: int | None = None) -> np.ndarray:
    return np.concatenate([
        model.infer(windows[i:i + INFERENCE_CHUNK], start, stop)
        for i in range(0, len(windows), INFERENCE_CHUNK)
        ])


def train(model: StressNet, dataset: WindowedDataset, config: TrainConfig | None = None) -> TrainReport:
    '''
    Mini-batch training of every non-frozen layer. Raw datasets are
    normalised first and the statistics stored on the model.
    '''
    config = config or TrainConfig()
    _check_trainable(dataset)
    if not dataset.normalized:
        dataset = apply_normalizer(dataset, fit_normalizer(dataset))
    model.norm_stats = dataset.norm_stats

    report = TrainReport()
    if config.epochs == 0:
        return report

    started = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    optimizer = config.optimizer_state()
    labels = dataset.labels
    n = len(dataset)

    # outputs of the frozen prefix never change, compute them once
    prefix = model.frozen_prefix()
    inputs = _chunked_infer(model, dataset.windows, 0, prefix) if prefix else dataset.windows
    if prefix:
        _logger.info(f'Reusing outputs of the first {prefix} frozen layers')

    model.set_training(True)
    try:
        with tqdm(range(config.epochs), unit='epoch', disable=not config.progress) as pbar:
            for epoch in pbar:
                order = rng.permutation(n) if config.shuffle else np.arange(n)
                total_loss = 0.
                correct = 0
                for batch_start in range(0, n, config.batch_size):
                    index = order[batch_start:batch_start + config.batch_size]
                    probs = model.forward(inputs[index], rng=rng, start=prefix)
                    loss, logit_grad = batch_cross_entropy(probs, labels[index])
                    if not np.isfinite(loss):
                        raise TrainingDivergedError(
                            f'non-finite loss at epoch {epoch + 1}, batch {batch_start // config.batch_size + 1} '
                            f'(learning rate {config.learning_rate}); try a smaller learning rate')

                    model.backward(logit_grad)
                    params, grads = model.trainable_parameters()
                    optimizer.step(params, grads)

                    total_loss += loss * len(index)
                    correct += int((probs.argmax(axis=1) == labels[index]).sum())

                report.epoch_losses.append(total_loss / n)
                report.epoch_accuracies.append(correct / n)
                pbar.set_description(f'loss {report.epoch_losses[-1]:.4f} acc {report.epoch_accuracies[-1]:.3f}')
                _logger.debug(f'Epoch {epoch + 1}: loss {report.epoch_losses[-1]:.6f}, '
                              f'accuracy {report.epoch_accuracies[-1]:.4f}')
    finally:
        model.set_training(False)

    report.wall_time_s = time.perf_counter() - started
    return report


def _normalized_for(model: StressNet, dataset: WindowedDataset) -> WindowedDataset:
    if dataset.normalized:
        if model.norm_stats is not None and dataset.norm_stats != model.norm_stats:
            raise InvalidArgumentError(
                f'dataset {dataset.subject_id!r} was normalised with statistics other than the model\'s')
        return dataset
    if model.norm_stats is None:
        _logger.warning('Model carries no normalisation statistics, using raw windows')
        return dataset
    return apply_normalizer(dataset, model.norm_stats)


def predict(model: StressNet, window: np.ndarray) -> tuple[int, np.ndarray]:
    '''
    Class and probabilities of one window, already normalised with the
    model's statistics. Ties go to the first class.
    '''
    window = np.asarray(window, dtype=np.float32)
    if window.shape != model.input_shape:
        raise ShapeError('window', list(model.input_shape), list(window.shape))
    probs = model.infer(window[None])[0]
    return int(np.argmax(probs)), probs


def predict_dataset(model: StressNet, dataset: WindowedDataset) -> tuple[np.ndarray, np.ndarray]:
    '''Classes and probabilities of every window of a raw or model-normalised dataset.'''
    dataset = _normalized_for(model, dataset)
    if dataset.windows.shape[1:] != model.input_shape:
        raise ShapeError('windows', list(model.input_shape), list(dataset.windows.shape[1:]))
    probs = _chunked_infer(model, dataset.windows)
    return probs.argmax(axis=1), probs


def cross_validate(
        dataset: WindowedDataset,
        config: TrainConfig | None = None,
        k: int = settings.FOLDS,
        model_factory: Callable[[int, int], StressNet] = build_base_model,
        ) -> TrainReport:
    '''
    Train k fresh models on the k-fold splits of a raw dataset, fitting the
    normaliser on each fold's training portion only.
    '''
    config = config or TrainConfig()
    if dataset.normalized:
        raise InvalidArgumentError('cross-validation expects raw windows, normalisation is fit per fold')
    _check_trainable(dataset)

    started = time.perf_counter()
    report = TrainReport()
    splits = kfold_split(dataset, k, config.seed)
    fold_config = TrainConfig(**{**config.as_dict(), 'progress': False})
    for fold, (train_index, test_index) in enumerate(tqdm(splits, unit='fold', disable=not config.progress)):
        train_set = dataset.subset(train_index)
        stats = fit_normalizer(train_set)
        model = model_factory(dataset.window_len, config.seed)
        fold_report = train(model, apply_normalizer(train_set, stats), fold_config)

        predictions, _ = predict_dataset(model, dataset.subset(test_index))
        accuracy = float((predictions == dataset.labels[test_index]).mean())
        report.fold_accuracies.append(accuracy)
        report.epoch_losses.extend(fold_report.epoch_losses)
        report.epoch_accuracies.extend(fold_report.epoch_accuracies)
        _logger.info(f'Fold {fold + 1}/{k}: test accuracy {accuracy:.4f}')

    report.wall_time_s = time.perf_counter() - started
    return report


def render_train_report(report: TrainReport) -> str:
    '''CSV of per-epoch and per-fold results; wall time is left out so reruns match byte for byte.'''
    rows = [('epoch', str(i + 1), f'{loss:.6f}', f'{accuracy:.6f}')
            for i, (loss, accuracy) in enumerate(zip(report.epoch_losses, report.epoch_accuracies))]
    rows += [('fold', str(i + 1), '', f'{accuracy:.6f}') for i, accuracy in enumerate(report.fold_accuracies)]
    if report.mean_cv_accuracy is not None:
        rows.append(('mean', '', '', f'{report.mean_cv_accuracy:.6f}'))
    df = pd.DataFrame(rows, columns=['kind', 'index', 'loss', 'accuracy'])
    return df.to_csv(index=False, lineterminator='\n')
