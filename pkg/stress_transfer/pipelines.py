# Session CSV ingestion and export
#
# Schema: header `timestamp_ms,hr_bpm,hrv_ms,eda_raw,label`, one row per
# sample, UTF-8, label in {-1, 0, 1}. The generator and the live session
# write it, the loader reads it back.


import csv
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from stress_transfer import settings
from stress_transfer.exceptions import EmptySessionError, SessionFormatError
from stress_transfer.items import SensorSample, Session


_logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.4f'
_VALID_LABELS = (settings.UNLABELED, settings.RELAXED, settings.STRESSED)


def _ensure_dir(save_dir: Path) -> None:
    if not save_dir.exists():
        _logger.debug(f'Creating directory {save_dir}')
        save_dir.mkdir(parents=True)


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    '''Write to a temporary file next to `path`, then rename it over `path`.'''
    path = Path(path)
    _ensure_dir(path.parent)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode('utf-8'))


def _first_bad_row(mask: np.ndarray) -> int:
    # data row i sits on file line i + 2 (line 1 is the header)
    return int(np.flatnonzero(mask)[0]) + 2


def load_session_csv(
        path: Path | str,
        subject_id: str | None = None,
        sample_rate_hz: float = settings.SAMPLE_RATE_HZ,
        ) -> Session:
    path = Path(path)
    subject_id = subject_id if subject_id is not None else path.stem

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SessionFormatError(path, 1, 'missing header') from None
    except pd.errors.ParserError as e:
        raise SessionFormatError(path, 0, f'malformed CSV: {e}') from e

    missing = [c for c in settings.CSV_COLUMNS if c not in df.columns]
    if missing:
        raise SessionFormatError(path, 1, f'missing column(s) {", ".join(missing)}')
    if len(df) == 0:
        raise EmptySessionError(f'{path}: empty session')

    columns = {}
    for column in settings.CSV_COLUMNS:
        values = pd.to_numeric(df[column].str.strip(), errors='coerce')
        bad = values.isna().to_numpy()
        if bad.any():
            line = _first_bad_row(bad)
            raise SessionFormatError(path, line, f'cannot parse {column} value {df[column].iloc[line - 2]!r}')
        columns[column] = values.to_numpy()

    timestamps = columns['timestamp_ms']
    labels = columns['label']
    hr, hrv, eda = columns['hr_bpm'], columns['hrv_ms'], columns['eda_raw']
    checks = (
        (~np.isfinite(timestamps) | (timestamps != np.round(timestamps)), 'timestamp_ms must be an integer'),
        (~np.isin(labels, _VALID_LABELS), f'label must be one of {_VALID_LABELS}'),
        (~np.isfinite(hr) | (hr <= 0), 'hr_bpm must be positive'),
        (~np.isfinite(hrv) | (hrv < 0), 'hrv_ms must be non-negative'),
        (~np.isfinite(eda) | (eda < 0), 'eda_raw must be non-negative'),
        )
    for bad, message in checks:
        if bad.any():
            line = _first_bad_row(bad)
            raise SessionFormatError(path, line, message)

    not_increasing = np.concatenate(([False], np.diff(timestamps) <= 0))
    if not_increasing.any():
        raise SessionFormatError(path, _first_bad_row(not_increasing), 'timestamps are not strictly increasing')

    _logger.debug(f'Loaded {len(df)} samples from {path}')
    return Session(
        subject_id=subject_id,
        timestamp_ms=timestamps.astype(np.int64),
        values=np.stack([hr, hrv, eda], axis=1),
        labels=labels.astype(np.int8),
        sample_rate_hz=sample_rate_hz,
        )


def session_frame(session: Session) -> pd.DataFrame:
    return pd.DataFrame({
        'timestamp_ms': session.timestamp_ms,
        'hr_bpm': session.values[:, 0],
        'hrv_ms': session.values[:, 1],
        'eda_raw': session.values[:, 2],
        'label': session.labels.astype(np.int64),
        }, columns=list(settings.CSV_COLUMNS))


def write_session_csv(session: Session, path: Path | str) -> Path:
    path = Path(path)
    text = session_frame(session).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    atomic_write_text(path, text)
    _logger.info(f'Wrote {len(session)} samples to {path}')
    return path


class SessionCsvExporter:
    '''
    Streams samples to a session CSV one row at a time, in the same format as
    `write_session_csv`. With `append`, rows are added after the ones already
    in the file and the header is only written to a new or empty file.
    '''
    def __init__(self, path: Path | str, append: bool = False):
        self._path = Path(path)
        self._append = append
        self._file_handler = None
        self._writer = None
        self.exported = 0

    @property
    def path(self) -> Path:
        return self._path

    def open(self) -> 'SessionCsvExporter':
        _ensure_dir(self._path.parent)
        has_rows = self._append and self._path.exists() and self._path.stat().st_size > 0
        _logger.debug(f'Exporting samples to {self._path}')

        self._file_handler = open(self._path, 'a' if self._append else 'w', newline='', encoding='utf-8')
        self._writer = csv.writer(self._file_handler, lineterminator='\n')
        if not has_rows:
            self._writer.writerow(settings.CSV_COLUMNS)
        return self

    def export_sample(self, sample: SensorSample) -> None:
        if self._writer is None:
            raise RuntimeError('exporter is not open')
        self._writer.writerow((
            sample.timestamp_ms,
            FLOAT_FORMAT % sample.hr,
            FLOAT_FORMAT % sample.hrv,
            FLOAT_FORMAT % sample.eda,
            sample.label,
            ))
        self.exported += 1

    def close(self) -> None:
        if self._file_handler is not None:
            self._file_handler.close()
            self._file_handler = None
            self._writer = None

    def __enter__(self) -> 'SessionCsvExporter':
        return self.open()

    def __exit__(self, *exc_info) -> None:
        self.close()
