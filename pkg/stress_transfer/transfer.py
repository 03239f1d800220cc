import copy
import hashlib
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from tqdm import tqdm

from stress_transfer import settings
from stress_transfer.container import read_container, save_model
from stress_transfer.evaluation import EvalReport, evaluate
from stress_transfer.exceptions import InvalidArgumentError, ProvenanceError, SingleClassError
from stress_transfer.items import WindowedDataset
from stress_transfer.layers import Conv1DLayer, DropoutLayer, FlattenLayer
from stress_transfer.model import StressNet, TrainConfig, TrainReport, head_layers, train
from stress_transfer.windowing import apply_normalizer, fit_normalizer, invert_normalizer, stratified_split


_logger = logging.getLogger(__name__)


def default_finetune_config() -> TrainConfig:
    return TrainConfig(learning_rate=settings.LEARNING_RATE * settings.FINETUNE_LR_SCALE)


@dataclass
class AdaptationSpec:
    hidden_width: int = settings.HIDDEN_WIDTH
    class_count: int = settings.CLASS_COUNT
    # layer indices to freeze; None freezes every convolution
    freeze_policy: frozenset[int] | None = None
    finetune_config: TrainConfig = field(default_factory=default_finetune_config)
    seed: int = settings.SEED

    def __post_init__(self):
        if self.hidden_width < 1:
            raise InvalidArgumentError(f'hidden width must be positive, got {self.hidden_width}')
        if self.class_count < 2:
            raise InvalidArgumentError(f'class count must be at least 2, got {self.class_count}')
        if self.freeze_policy is not None:
            self.freeze_policy = frozenset(int(i) for i in self.freeze_policy)


@dataclass(frozen=True)
class Provenance:
    base_checksum: str
    frozen_layers: tuple[int, ...]
    hidden_width: int
    class_count: int
    finetune_config: dict
    user_id: str | None = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data['frozen_layers'] = list(self.frozen_layers)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'Provenance':
        try:
            return cls(
                base_checksum=str(data['base_checksum']),
                frozen_layers=tuple(int(i) for i in data['frozen_layers']),
                hidden_width=int(data['hidden_width']),
                class_count=int(data['class_count']),
                finetune_config=dict(data['finetune_config']),
                user_id=data.get('user_id'),
                )
        except (KeyError, TypeError, ValueError) as e:
            raise ProvenanceError(f'malformed provenance block: {e}') from e


@dataclass
class PersonalModel:
    model: StressNet
    provenance: Provenance

    @property
    def norm_stats(self):
        return self.model.norm_stats

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.provenance.finetune_config)


def parameter_checksum(model: StressNet, layer_indices: Sequence[int] | None = None) -> str:
    '''SHA-256 over the little-endian float32 weights then bias of the chosen layers.'''
    if layer_indices is None:
        layer_indices = [i for i, layer in enumerate(model.layers) if layer.params]

    digest = hashlib.sha256()
    for i in sorted(layer_indices):
        layer = model.layers[i]
        digest.update(f'{i}:{layer.name};'.encode('ascii'))
        for name in ('weights', 'bias') if layer.params else ():
            digest.update(np.ascontiguousarray(layer.params[name], dtype='<f4').tobytes())
    return digest.hexdigest()


def _body_length(model: StressNet) -> int:
    '''Layers kept by adaptation: everything up to Flatten and the dropout right after it.'''
    end = model.index_of(FlattenLayer) + 1
    if end < len(model.layers) and isinstance(model.layers[end], DropoutLayer):
        end += 1
    return end


def adapt_head(base: StressNet, spec: AdaptationSpec | None = None) -> PersonalModel:
    '''
    Drop the classifier head of `base` and append a freshly initialised
    Dense(flatten_dim -> hidden_width) ReLU Dense(hidden_width -> class_count)
    Softmax; freeze the layers named by `spec.freeze_policy` (the convolutions by default).
    '''
    spec = spec or AdaptationSpec()
    body_len = _body_length(base)
    flatten_dim = base.layer_shapes()[base.index_of(FlattenLayer)][0]

    body = copy.deepcopy(base.layers[:body_len])
    head = head_layers(flatten_dim, spec.hidden_width, spec.class_count, np.random.default_rng(spec.seed))
    layers = body + head

    if spec.freeze_policy is None:
        frozen = frozenset(i for i, layer in enumerate(body) if isinstance(layer, Conv1DLayer))
    else:
        invalid = sorted(i for i in spec.freeze_policy if not 0 <= i < len(layers))
        if invalid:
            raise InvalidArgumentError(
                f'freeze policy names layers {invalid}, the adapted network has layers 0 to {len(layers) - 1}')
        frozen = spec.freeze_policy

    for i, layer in enumerate(layers):
        layer.frozen = i in frozen
        layer.clear_cache()

    model = StressNet(layers, input_shape=base.input_shape, class_count=spec.class_count,
                      norm_stats=base.norm_stats)
    model.set_training(False)

    frozen_layers = tuple(sorted(frozen))
    provenance = Provenance(
        base_checksum=parameter_checksum(base, [i for i in frozen_layers if i < body_len]),
        frozen_layers=frozen_layers,
        hidden_width=spec.hidden_width,
        class_count=spec.class_count,
        finetune_config=spec.finetune_config.as_dict(),
        )
    new_params = sum(layer.parameter_count for layer in head)
    _logger.info(f'Adapted head: {new_params} new parameters, frozen layers {list(frozen_layers)}')
    return PersonalModel(model, provenance)


def _raw(dataset: WindowedDataset) -> WindowedDataset:
    return invert_normalizer(dataset) if dataset.normalized else dataset


def split_user_data(
        user_data: WindowedDataset,
        test_fraction: float = settings.USER_TEST_FRACTION,
        seed: int = settings.SEED,
        ) -> tuple[WindowedDataset, WindowedDataset]:
    '''Stratified (train, test) split of one user's windows.'''
    train_index, test_index = stratified_split(user_data.labels, test_fraction, seed)
    return user_data.subset(train_index), user_data.subset(test_index)


def finetune(
        personal: PersonalModel,
        user_data: WindowedDataset,
        config: TrainConfig | None = None,
        user_id: str | None = None,
        test_fraction: float = settings.USER_TEST_FRACTION,
        ) -> tuple[PersonalModel, TrainReport]:
    '''
    Fine-tune the non-frozen layers of a copy of `personal` on the training
    split of `user_data`, with the normaliser refit on that split. The
    returned report holds the evaluation on the held-out split. With zero
    epochs the copy keeps the statistics of `personal` and predicts like it.
    '''
    config = config or personal.train_config()
    user_data = _raw(user_data)
    classes = set(np.unique(user_data.labels).tolist()) - {settings.UNLABELED}
    if len(classes) < settings.CLASS_COUNT:
        present = ', '.join(settings.CLASS_NAMES[c] for c in sorted(classes)) or 'no'
        raise SingleClassError(
            f'user data holds only {present} windows; label more data of both '
            f'{" and ".join(settings.CLASS_NAMES)} states before fine-tuning')

    train_set, test_set = split_user_data(user_data, test_fraction, config.seed)
    stats = fit_normalizer(train_set)

    tuned = personal.model.copy()
    _logger.info(f'Fine-tuning on {len(train_set)} windows, holding out {len(test_set)}')
    report = train(tuned, apply_normalizer(train_set, stats), config)
    if config.epochs == 0:
        tuned.norm_stats = personal.model.norm_stats
    if len(test_set) > 0:
        report.holdout = evaluate(tuned, test_set)

    provenance = replace(
        personal.provenance,
        finetune_config=config.as_dict(),
        user_id=user_id if user_id is not None else (user_data.subject_id or personal.provenance.user_id),
        )
    return PersonalModel(tuned, provenance), report


def baseline_on_target(base: StressNet, user_data: WindowedDataset) -> EvalReport:
    '''The unadapted base model, with its own normalisation statistics, on a user's data.'''
    if base.norm_stats is None:
        raise InvalidArgumentError('the base model carries no normalisation statistics')
    return evaluate(base, _raw(user_data))


def _as_model(model: PersonalModel | StressNet) -> StressNet:
    return model.model if isinstance(model, PersonalModel) else model


def cross_user_matrix(
        models: Sequence[PersonalModel | StressNet],
        datasets: Sequence[WindowedDataset],
        test_fraction: float = settings.USER_TEST_FRACTION,
        seed: int = settings.SEED,
        progress: bool = False,
        ) -> np.ndarray:
    '''Entry (i, j) is the accuracy of model j on the held-out split of user i.'''
    if len(models) == 0 or len(datasets) == 0:
        raise InvalidArgumentError('cross-user evaluation needs at least one model and one dataset')

    test_sets = [split_user_data(_raw(d), test_fraction, seed)[1] for d in datasets]
    matrix = np.zeros((len(test_sets), len(models)))
    cells = [(i, j) for i in range(len(test_sets)) for j in range(len(models))]
    for i, j in tqdm(cells, unit='cell', disable=not progress):
        matrix[i, j] = evaluate(_as_model(models[j]), test_sets[i]).accuracy
    return matrix


def save_personal_model(personal: PersonalModel, path: Path | str) -> Path:
    return save_model(personal.model, personal.model.norm_stats, path, provenance=personal.provenance.to_dict())


def load_personal_model(path: Path | str) -> PersonalModel:
    model, _, provenance = read_container(path)
    if provenance is None:
        raise ProvenanceError(f'{path} is a base model, it carries no provenance block')
    provenance = Provenance.from_dict(provenance)
    if any(not 0 <= i < len(model.layers) for i in provenance.frozen_layers):
        raise ProvenanceError(f'{path}: provenance names layers the network does not have')
    # the container only records freeze flags of parametric layers
    for i in provenance.frozen_layers:
        model.layers[i].frozen = True
    return PersonalModel(model, provenance)


def verify_provenance(personal: PersonalModel, base: StressNet) -> None:
    '''Raise ProvenanceError unless the frozen layers match `base` bit for bit.'''
    frozen = list(personal.provenance.frozen_layers)
    body_len = _body_length(base)
    shared = [i for i in frozen if i < body_len]

    base_checksum = parameter_checksum(base, shared)
    if base_checksum != personal.provenance.base_checksum:
        raise ProvenanceError('the given base model is not the one this personal model was adapted from')
    if parameter_checksum(personal.model, shared) != base_checksum:
        raise ProvenanceError('frozen layers of the personal model differ from the base model')
