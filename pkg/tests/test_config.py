from pathlib import Path

import pytest

from stress_transfer import settings
from stress_transfer.config import CliConfig
from stress_transfer.exceptions import ConfigError


@pytest.fixture(autouse=True)
def no_project_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def write_config(path, body, section='stress_transfer'):
    path.write_text(f'[{section}]\n{body}\n', encoding='utf-8')
    return path


def test_defaults_without_a_file():
    cfg = CliConfig.load()
    assert cfg == CliConfig()
    assert cfg.window == settings.WINDOW_LEN
    assert cfg.data_dir == Path('data')


def test_file_values_and_overrides(tmp_path):
    path = write_config(tmp_path / 'run.cfg', 'epochs = 7\nlr = 0.05\ndata_dir = /tmp/sessions')
    cfg = CliConfig.load(path, {'epochs': 3, 'seed': None})
    assert cfg.epochs == 3
    assert cfg.lr == pytest.approx(0.05)
    assert cfg.data_dir == Path('/tmp/sessions')
    assert cfg.seed == settings.SEED


def test_project_file_is_picked_up(tmp_path):
    write_config(tmp_path / settings.CONFIG_FILE, 'window = 200')
    assert CliConfig.load().window == 200


@pytest.mark.parametrize('body, section, message', [
    ('colour = blue', 'stress_transfer', 'unknown config key'),
    ('epochs = 5', 'training', 'unknown section'),
    ('epochs = many', 'stress_transfer', 'epochs'),
    ('epochs = -1', 'stress_transfer', 'non-negative'),
    ('folds = 1', 'stress_transfer', 'folds'),
    ('optimizer = rmsprop', 'stress_transfer', 'optimizer'),
    ('speed = 0', 'stress_transfer', 'speed'),
    ])
def test_invalid_files(tmp_path, body, section, message):
    path = write_config(tmp_path / 'bad.cfg', body, section)
    with pytest.raises(ConfigError, match=message):
        CliConfig.load(path)


def test_explicit_missing_file(tmp_path):
    with pytest.raises(ConfigError, match='does not exist'):
        CliConfig.load(tmp_path / 'missing.cfg')


def test_unknown_override():
    with pytest.raises(ConfigError):
        CliConfig.load(overrides={'colour': 'blue'})


def test_render_round_trips(tmp_path):
    cfg = CliConfig.load(overrides={'epochs': 4, 'lr': 0.002, 'speed': 8.})
    path = tmp_path / 'echo.cfg'
    path.write_text(cfg.render(), encoding='utf-8')
    assert CliConfig.load(path) == cfg
    assert cfg.render().startswith('[stress_transfer]\n')


def test_training_configs():
    cfg = CliConfig(epochs=5, lr=0.02, batch=8, optimizer='adam', seed=3)
    train = cfg.train_config()
    assert (train.epochs, train.batch_size, train.optimizer, train.seed) == (5, 8, 'adam', 3)
    assert cfg.finetune_config().learning_rate == pytest.approx(0.02 * settings.FINETUNE_LR_SCALE)
