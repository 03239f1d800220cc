# Command-line configuration
#
# Read from an INI file with a single [stress_transfer] section (see
# stress_transfer.cfg at the project root); command-line flags override
# file values. `render` echoes the effective configuration in the same
# format, so any run can be repeated from its log.


import configparser
import io
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from stress_transfer import settings
from stress_transfer.exceptions import ConfigError
from stress_transfer.model import TrainConfig
from stress_transfer.optimizers import OPTIMIZER_KINDS


_logger = logging.getLogger(__name__)

SECTION = settings.PROJECT_NAME


@dataclass(frozen=True)
class CliConfig:
    data_dir: Path = settings.DATA_DIR
    model_dir: Path = settings.MODEL_DIR
    report_dir: Path = settings.REPORT_DIR
    window: int = settings.WINDOW_LEN
    stride: int = settings.WINDOW_STRIDE
    epochs: int = settings.EPOCHS
    lr: float = settings.LEARNING_RATE
    batch: int = settings.BATCH_SIZE
    optimizer: str = 'sgd'
    momentum: float = settings.MOMENTUM
    seed: int = settings.SEED
    folds: int = settings.FOLDS
    base_subjects: int = settings.BASE_SUBJECTS
    target_subjects: int = settings.TARGET_SUBJECTS
    finetune_lr_scale: float = settings.FINETUNE_LR_SCALE
    hidden_width: int = settings.HIDDEN_WIDTH
    speed: float = settings.LIVE_SPEED

    def __post_init__(self):
        positive = ('window', 'stride', 'batch', 'base_subjects', 'target_subjects', 'hidden_width',
                    'lr', 'finetune_lr_scale', 'speed')
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f'{name} must be positive, got {getattr(self, name)}')
        if self.epochs < 0:
            raise ConfigError(f'epochs must be non-negative, got {self.epochs}')
        if self.folds < 2:
            raise ConfigError(f'folds must be at least 2, got {self.folds}')
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ConfigError(f'optimizer must be one of {OPTIMIZER_KINDS}, got {self.optimizer!r}')

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def _convert(cls, key: str, value: Any) -> Any:
        kind = {f.name: f.type for f in fields(cls)}[key]
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f'{key}: cannot read {value!r} as {kind.__name__}') from None

    @classmethod
    def load(cls, path: Path | str | None = None, overrides: dict[str, Any] | None = None) -> 'CliConfig':
        '''
        Defaults, then the file at `path` (the project file when None, skipped
        if it does not exist), then the non-None `overrides`.
        '''
        values = {}
        if path is None:
            path = settings.CONFIG_FILE
            required = False
        else:
            required = True
        path = Path(path)

        if path.exists():
            values.update(cls._read_file(path))
        elif required:
            raise ConfigError(f'config file {path} does not exist')

        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key not in cls.keys():
                raise ConfigError(f'unknown config key {key!r}')
            values[key] = cls._convert(key, value)

        return cls(**values)

    @classmethod
    def _read_file(cls, path: Path) -> dict[str, Any]:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding='utf-8')
        except configparser.Error as e:
            raise ConfigError(f'{path}: {e}') from e

        unknown_sections = [s for s in parser.sections() if s != SECTION]
        if unknown_sections:
            raise ConfigError(f'{path}: unknown section(s) {", ".join(unknown_sections)}, expected [{SECTION}]')
        if not parser.has_section(SECTION):
            _logger.warning(f'{path} has no [{SECTION}] section, using defaults')
            return {}

        values = {}
        for key, value in parser.items(SECTION):
            if key not in cls.keys():
                raise ConfigError(f'{path}: unknown config key {key!r}')
            values[key] = cls._convert(key, value.strip())
        _logger.debug(f'Read {len(values)} config values from {path}')
        return values

    def with_overrides(self, **overrides) -> 'CliConfig':
        return replace(self, **{k: self._convert(k, v) for k, v in overrides.items() if v is not None})

    def train_config(self, progress: bool = False) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch,
            learning_rate=self.lr,
            optimizer=self.optimizer,
            momentum=self.momentum,
            seed=self.seed,
            progress=progress,
            )

    def finetune_config(self, progress: bool = False) -> TrainConfig:
        return replace(self.train_config(progress), learning_rate=self.lr * self.finetune_lr_scale)

    def render(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser[SECTION] = {key: str(getattr(self, key)) for key in self.keys()}
        out = io.StringIO()
        parser.write(out)
        return out.getvalue()
