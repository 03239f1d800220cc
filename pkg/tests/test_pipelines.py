import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import make_session
from stress_transfer import settings
from stress_transfer.exceptions import EmptySessionError, SessionFormatError
from stress_transfer.items import SensorSample
from stress_transfer.pipelines import (SessionCsvExporter, atomic_write_text, load_session_csv,
                                       write_session_csv)


HEADER = 'timestamp_ms,hr_bpm,hrv_ms,eda_raw,label\n'


def write(path, text):
    path.write_text(text, encoding='utf-8')
    return path


def test_load_two_rows(tmp_path):
    path = write(tmp_path / 'user_7.csv', HEADER + '0,72.5,41.0,300.2,0\n33,73.0,40.5,301.0,1\n')
    session = load_session_csv(path)
    assert session.subject_id == 'user_7'
    assert len(session) == 2
    assert session.timestamp_ms.tolist() == [0, 33]
    assert_allclose(session.values[1], [73., 40.5, 301.])
    assert session.labels.tolist() == [settings.RELAXED, settings.STRESSED]


def test_header_only_is_an_empty_session(tmp_path):
    with pytest.raises(EmptySessionError, match='empty session'):
        load_session_csv(write(tmp_path / 's.csv', HEADER))


def test_missing_header(tmp_path):
    with pytest.raises(SessionFormatError) as info:
        load_session_csv(write(tmp_path / 's.csv', ''))
    assert info.value.line == 1

    with pytest.raises(SessionFormatError, match='eda_raw'):
        load_session_csv(write(tmp_path / 't.csv', 'timestamp_ms,hr_bpm,hrv_ms,label\n0,70,40,0\n'))


def test_bad_label_names_the_line(tmp_path):
    text = HEADER + '0,72,41,300,0\n33,72,41,300,0\n67,72,41,300,7\n'
    with pytest.raises(SessionFormatError, match='line 4') as info:
        load_session_csv(write(tmp_path / 's.csv', text))
    assert info.value.line == 4


@pytest.mark.parametrize('row, message', [
    ('33,abc,41,300,0', 'hr_bpm'),
    ('33,0,41,300,0', 'hr_bpm must be positive'),
    ('33,72,-1,300,0', 'hrv_ms'),
    ('33,72,41,-0.5,0', 'eda_raw'),
    ('33.5,72,41,300,0', 'integer'),
    ])
def test_invalid_values(tmp_path, row, message):
    text = HEADER + '0,72,41,300,0\n' + row + '\n'
    with pytest.raises(SessionFormatError, match=message) as info:
        load_session_csv(write(tmp_path / 's.csv', text))
    assert info.value.line == 3


def test_non_monotonic_timestamps(tmp_path):
    text = HEADER + '0,72,41,300,0\n33,72,41,300,0\n33,72,41,300,0\n'
    with pytest.raises(SessionFormatError, match='strictly increasing') as info:
        load_session_csv(write(tmp_path / 's.csv', text))
    assert info.value.line == 4


def test_write_is_byte_identical(tmp_path):
    session = make_session(50, labels=np.arange(50) % 3 - 1)
    first = write_session_csv(session, tmp_path / 'a.csv').read_bytes()
    second = write_session_csv(load_session_csv(tmp_path / 'a.csv'), tmp_path / 'b.csv').read_bytes()
    assert first == second
    assert first.decode('utf-8').startswith(HEADER)


def test_write_then_load_keeps_values(tmp_path):
    session = make_session(30)
    loaded = load_session_csv(write_session_csv(session, tmp_path / 'nested' / 's.csv'))
    assert_array_equal(loaded.timestamp_ms, session.timestamp_ms)
    assert_allclose(loaded.values, session.values, atol=5e-5)


def test_exporter_matches_batch_writer(tmp_path):
    session = make_session(20, labels=np.arange(20) % 2)
    write_session_csv(session, tmp_path / 'batch.csv')
    with SessionCsvExporter(tmp_path / 'stream.csv') as exporter:
        for sample in session:
            exporter.export_sample(sample)
    assert exporter.exported == 20
    assert (tmp_path / 'stream.csv').read_bytes() == (tmp_path / 'batch.csv').read_bytes()


def test_exporter_appends_without_second_header(tmp_path):
    path = tmp_path / 'live.csv'
    for timestamp in (0, 33):
        with SessionCsvExporter(path, append=True) as exporter:
            exporter.export_sample(SensorSample(timestamp, 70., 40., 300., settings.STRESSED))

    lines = path.read_text().splitlines()
    assert lines[0] == HEADER.strip()
    assert len(lines) == 3
    assert len(load_session_csv(path)) == 2


def test_exporter_must_be_open(tmp_path):
    with pytest.raises(RuntimeError):
        SessionCsvExporter(tmp_path / 's.csv').export_sample(SensorSample(0, 70., 40., 300.))


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    atomic_write_text(tmp_path / 'out' / 'report.csv', 'a,b\n')
    assert [p.name for p in (tmp_path / 'out').iterdir()] == ['report.csv']
