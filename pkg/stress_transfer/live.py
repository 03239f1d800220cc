# Live self-labelling session
#
# Replays a recorded sensor stream at 30 Hz x speed while the user labels
# it from the keyboard:  s = stressed,  r = relaxed,  u = unlabeled,  q = quit.
# A label change takes effect on the next emitted sample. Every emitted
# sample is appended to the output session CSV with the label active at its
# timestamp, and the model classifies the rolling window once per stride.


import logging
import queue
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from stress_transfer import settings
from stress_transfer.exceptions import InvalidArgumentError, NotInteractiveError
from stress_transfer.items import Session
from stress_transfer.model import StressNet, predict
from stress_transfer.pipelines import SessionCsvExporter


_logger = logging.getLogger(__name__)

KEY_LABELS = {'s': settings.STRESSED, 'r': settings.RELAXED, 'u': settings.UNLABELED}
QUIT_KEY = 'q'


class KeySource(Protocol):
    def poll(self, sample_index: int) -> list[str]:
        '''Keys pressed since the last poll, checked before sample `sample_index` is emitted.'''


class ScriptedKeySource:
    '''Delivers each (sample_index, key) event when replay reaches that sample.'''
    def __init__(self, events: list[tuple[int, str]]):
        self._events = sorted(events, key=lambda e: e[0])
        self._next = 0

    def poll(self, sample_index: int) -> list[str]:
        keys = []
        while self._next < len(self._events) and self._events[self._next][0] <= sample_index:
            keys.append(self._events[self._next][1])
            self._next += 1
        return keys


class TerminalKeySource:
    '''
    Reads single key presses from a terminal in cbreak mode on a background
    thread. Use as a context manager so the terminal mode is restored.
    '''
    def __init__(self, stream=None):
        self._stream = stream if stream is not None else sys.stdin
        self._keys: queue.Queue[str] = queue.Queue()
        self._stop_event = threading.Event()
        self._thread: threading.Thread | None = None
        self._saved_mode = None

    def __enter__(self) -> 'TerminalKeySource':
        if not self._stream.isatty():
            raise NotInteractiveError(
                'live labelling needs an interactive terminal; '
                'use `stress-transfer predict` to classify a recorded session instead')

        import termios
        import tty

        fd = self._stream.fileno()
        self._saved_mode = termios.tcgetattr(fd)
        tty.setcbreak(fd)
        self._thread = threading.Thread(target=self._read_keys, name='live-keys', daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self._stop_event.set()
        if self._saved_mode is not None:
            import termios
            termios.tcsetattr(self._stream.fileno(), termios.TCSADRAIN, self._saved_mode)
            self._saved_mode = None

    def _read_keys(self) -> None:
        import select

        while not self._stop_event.is_set():
            ready, _, _ = select.select([self._stream], [], [], 0.1)
            if ready:
                key = self._stream.read(1)
                if key:
                    self._keys.put(key.lower())

    def poll(self, sample_index: int) -> list[str]:
        keys = []
        while True:
            try:
                keys.append(self._keys.get_nowait())
            except queue.Empty:
                return keys


@dataclass
class LivePrediction:
    sample_index: int
    timestamp_ms: int
    label: int
    probabilities: np.ndarray
    active_label: int


@dataclass
class LiveResult:
    emitted: int = 0
    labelled: int = 0
    quit_early: bool = False
    predictions: list[LivePrediction] = field(default_factory=list)


class LiveSession:
    def __init__(
            self,
            model: StressNet,
            source: Session,
            output_path: Path | str,
            key_source: KeySource,
            speed: float = settings.LIVE_SPEED,
            stride: int = settings.WINDOW_STRIDE,
            sleep: Callable[[float], None] = time.sleep,
            clock: Callable[[], float] = time.monotonic,
            echo: Callable[[str], None] = print,
            ):
        if not speed > 0:
            raise InvalidArgumentError(f'replay speed must be positive, got {speed}')
        if stride < 1:
            raise InvalidArgumentError(f'inference stride must be positive, got {stride}')
        if model.norm_stats is None:
            raise InvalidArgumentError('live inference needs a model with normalisation statistics')

        self.model = model
        self.source = source
        self.output_path = Path(output_path)
        self.key_source = key_source
        self.speed = speed
        self.stride = stride
        self._sleep = sleep
        self._clock = clock
        self._echo = echo

        self.label = settings.UNLABELED
        self.buffer: deque[np.ndarray] = deque(maxlen=model.window_len)
        self._mean = model.norm_stats.mean_array()
        self._std = model.norm_stats.std_array()

    @property
    def sample_period_s(self) -> float:
        return 1. / (self.source.sample_rate_hz * self.speed)

    def _handle_keys(self, sample_index: int) -> bool:
        for key in self.key_source.poll(sample_index):
            if key == QUIT_KEY:
                return True
            if key in KEY_LABELS and KEY_LABELS[key] != self.label:
                self.label = KEY_LABELS[key]
                name = 'unlabeled' if self.label == settings.UNLABELED else settings.CLASS_NAMES[self.label]
                _logger.debug(f'Label set to {name} at sample {sample_index}')
        return False

    def _classify(self, sample_index: int, timestamp_ms: int) -> LivePrediction:
        window = ((np.asarray(self.buffer, dtype=np.float32) - self._mean) / self._std).T
        label, probs = predict(self.model, window)
        active = 'unlabeled' if self.label == settings.UNLABELED else settings.CLASS_NAMES[self.label]
        self._echo(f'\t{timestamp_ms / 1000:8.1f}s  {settings.CLASS_NAMES[label]:>8} '
                   f'p={probs[label]:.2f}  [labelling: {active}]')
        return LivePrediction(sample_index, timestamp_ms, label, probs, self.label)

    def run(self) -> LiveResult:
        result = LiveResult()
        deadline = self._clock()
        with SessionCsvExporter(self.output_path) as exporter:
            for i in range(len(self.source)):
                if self._handle_keys(i):
                    result.quit_early = True
                    break

                sample = replace(self.source.sample(i), label=self.label)
                exporter.export_sample(sample)
                result.emitted += 1
                result.labelled += int(self.label != settings.UNLABELED)

                self.buffer.append(self.source.values[i])
                seen = i + 1
                if seen >= self.model.window_len and (seen - self.model.window_len) % self.stride == 0:
                    result.predictions.append(self._classify(i, sample.timestamp_ms))

                deadline += self.sample_period_s
                delay = deadline - self._clock()
                if delay > 0:
                    self._sleep(delay)

        _logger.info(f'Live session emitted {result.emitted} samples, {result.labelled} labelled, '
                     f'to {self.output_path}')
        return result
