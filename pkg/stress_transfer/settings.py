# Default settings for the stress_transfer project
#
# For simplicity, this file contains only settings considered important or
# commonly used. Every value can be overridden per run through
# `stress_transfer.cfg` or command-line flags (see `stress_transfer.config`).

from pathlib import Path

PROJECT_NAME = 'stress_transfer'

# Sensor stream
# HR, HRV and EDA are all sampled at the same nominal rate
SAMPLE_RATE_HZ = 30
CHANNELS = ('hr', 'hrv', 'eda')
CSV_COLUMNS = ('timestamp_ms', 'hr_bpm', 'hrv_ms', 'eda_raw', 'label')
# a gap longer than this many nominal periods splits a session into runs
MAX_GAP_PERIODS = 1.5

# Labels
UNLABELED = -1
RELAXED = 0
STRESSED = 1
CLASS_NAMES = ('relaxed', 'stressed')

# Windowing
# 400 records at 30 Hz is around 13 seconds
WINDOW_LEN = 400
WINDOW_STRIDE = 100
# warn when the minority class falls below this share of the windows
MIN_CLASS_RATIO = 0.4

# Network
DROPOUT_RATE = 0.3
HIDDEN_WIDTH = 160
CLASS_COUNT = 2

# Training
EPOCHS = 50
BATCH_SIZE = 32
LEARNING_RATE = 0.01
MOMENTUM = 0.9
# full-batch plain SGD on standardised windows lowers the loss every epoch below this rate
STABLE_LEARNING_RATE = 5e-3
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
FOLDS = 10
SEED = 0

# Transfer learning
FINETUNE_LR_SCALE = 0.1
USER_TEST_FRACTION = 0.2

# Synthetic population
BASE_SUBJECTS = 20
TARGET_SUBJECTS = 3

# Storage
DATA_DIR = Path('data')
MODEL_DIR = Path('models')
REPORT_DIR = Path('reports')
CONFIG_FILE = Path('stress_transfer.cfg')

# Live session
LIVE_SPEED = 1.0

# Logging
LOG_ENABLED = True
LOG_LEVEL = 'WARNING'
LOG_FORMAT = '%(asctime)s [%(name)s] %(levelname)s: %(message)s'
