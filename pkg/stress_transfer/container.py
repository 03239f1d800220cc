# Model container, little-endian throughout:
#
#   magic           8 bytes  b'STRSCNN1'
#   version         u32      FORMAT_VERSION
#   layer count     u32
#   input channels  u32
#   window length   u32
#   per layer:
#     type tag      u8       (see stress_transfer.layers.LAYER_TYPES)
#     hyperparams   u32/f32  (conv1d: in, out, kernel, stride, frozen;
#                             maxpool1d: pool, stride; dropout: f32 rate;
#                             dense: in, out, frozen; others: none)
#     payload size  u64      bytes of f32 parameters that follow
#     payload       f32[]    weights then bias, row-major
#   norm stats      6 x f32  (3 means, 3 standard deviations)
#   [provenance]    b'PROV', u32 size, UTF-8 JSON  (personalised models only)
#   crc32           u32      of every preceding byte

import json
import logging
import struct
import zlib
from pathlib import Path

import numpy as np

from stress_transfer import settings
from stress_transfer.exceptions import (BadMagicError, ChecksumError, ContainerError, InvalidArgumentError,
                                        TruncatedFileError, VersionMismatchError)
from stress_transfer.items import NormStats
from stress_transfer.layers import (LAYER_TYPES, BaseLayer, Conv1DLayer, DenseLayer, DropoutLayer,
                                    MaxPool1DLayer)
from stress_transfer.model import StressNet
from stress_transfer.pipelines import atomic_write_bytes


_logger = logging.getLogger(__name__)

MAGIC = b'STRSCNN1'
FORMAT_VERSION = 1
PROVENANCE_MARKER = b'PROV'
_F32 = np.dtype('<f4')


def _layer_header(layer: BaseLayer) -> bytes:
    header = struct.pack('<B', layer.tag)
    if isinstance(layer, Conv1DLayer):
        header += struct.pack('<5I', layer.in_channels, layer.out_channels, layer.kernel_size,
                              layer.stride, int(layer.frozen))
    elif isinstance(layer, MaxPool1DLayer):
        header += struct.pack('<2I', layer.pool_size, layer.stride)
    elif isinstance(layer, DropoutLayer):
        header += struct.pack('<f', layer.rate)
    elif isinstance(layer, DenseLayer):
        header += struct.pack('<3I', layer.in_units, layer.out_units, int(layer.frozen))
    return header


def _layer_payload(layer: BaseLayer) -> bytes:
    if not layer.params:
        return b''
    return b''.join(layer.params[name].astype(_F32).tobytes() for name in ('weights', 'bias'))


def encode_model(
        model: StressNet,
        norm_stats: NormStats,
        provenance: dict | None = None,
        ) -> bytes:
    if norm_stats is None:
        raise InvalidArgumentError('a model container needs normalisation statistics')

    channels, window_len = model.input_shape
    parts = [MAGIC, struct.pack('<4I', FORMAT_VERSION, len(model.layers), channels, window_len)]
    for layer in model.layers:
        payload = _layer_payload(layer)
        parts.append(_layer_header(layer))
        parts.append(struct.pack('<Q', len(payload)))
        parts.append(payload)

    parts.append(struct.pack('<6f', *norm_stats.mean, *norm_stats.std))
    if provenance is not None:
        block = json.dumps(provenance, sort_keys=True).encode('utf-8')
        parts.append(PROVENANCE_MARKER + struct.pack('<I', len(block)) + block)

    body = b''.join(parts)
    return body + struct.pack('<I', zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes, end: int):
        self._data = data
        self._end = end
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > self._end:
            raise TruncatedFileError(
                f'container truncated: needed {size} bytes at offset {self.offset}, '
                f'only {self._end - self.offset} left')
        chunk = self._data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def remaining(self) -> int:
        return self._end - self.offset


def _read_layer(reader: _Reader) -> BaseLayer:
    '''Header sizes must agree with the stored payload size before the layer is built.'''
    (tag,) = reader.unpack('<B')
    if tag not in LAYER_TYPES:
        raise ContainerError(f'unknown layer type tag {tag} at offset {reader.offset - 1}')

    layer_type = LAYER_TYPES[tag]
    frozen = 0
    if layer_type is Conv1DLayer:
        in_ch, out_ch, kernel, stride, frozen = reader.unpack('<5I')
        args = (in_ch, out_ch, kernel, stride)
        expected = 4 * (out_ch * in_ch * kernel + out_ch)
    elif layer_type is DenseLayer:
        in_units, out_units, frozen = reader.unpack('<3I')
        args = (in_units, out_units)
        expected = 4 * (out_units * in_units + out_units)
    elif layer_type is MaxPool1DLayer:
        args = reader.unpack('<2I')
        expected = 0
    elif layer_type is DropoutLayer:
        args = reader.unpack('<f')
        expected = 0
    else:
        args = ()
        expected = 0

    (size,) = reader.unpack('<Q')
    if size != expected:
        raise ContainerError(f'{layer_type.__name__} payload holds {size} bytes, header implies {expected}')
    payload = reader.take(size)

    try:
        layer = layer_type(*args)
    except InvalidArgumentError as e:
        raise ContainerError(f'invalid {layer_type.__name__} header: {e}') from e
    layer.frozen = bool(frozen)

    offset = 0
    for name in ('weights', 'bias') if layer.params else ():
        shape = layer.params[name].shape
        count = int(np.prod(shape))
        values = np.frombuffer(payload, dtype=_F32, count=count, offset=offset)
        layer.params[name] = values.astype(np.float32).reshape(shape)
        offset += 4 * count
    return layer


def decode_model(data: bytes) -> tuple[StressNet, NormStats, dict | None]:
    '''
    Checks run in order: magic, version, structure (truncation), checksum.
    '''
    if data[:len(MAGIC)] != MAGIC:
        raise BadMagicError(f'not a model container: expected magic {MAGIC!r}, got {bytes(data[:8])!r}')

    # the last 4 bytes are the checksum
    reader = _Reader(data, max(len(data) - 4, 0))
    reader.take(len(MAGIC))
    (version,) = reader.unpack('<I')
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f'container format version {version}, this build reads {FORMAT_VERSION}')

    layer_count, channels, window_len = reader.unpack('<3I')
    layers = [_read_layer(reader) for _ in range(layer_count)]
    stats = reader.unpack('<6f')

    provenance = None
    if reader.remaining > 0:
        if reader.take(len(PROVENANCE_MARKER)) != PROVENANCE_MARKER:
            raise ContainerError('unexpected bytes after normalisation statistics')
        (size,) = reader.unpack('<I')
        provenance = reader.take(size)
    if len(data) < reader.offset + 4:
        raise TruncatedFileError('container truncated: checksum missing')
    if reader.remaining != 0:
        raise ContainerError(f'{reader.remaining} trailing bytes before the checksum')

    (stored,) = struct.unpack('<I', data[reader.offset:reader.offset + 4])
    actual = zlib.crc32(data[:reader.offset])
    if stored != actual:
        raise ChecksumError(f'checksum mismatch: stored {stored:08x}, computed {actual:08x}')

    if provenance is not None:
        provenance = json.loads(provenance.decode('utf-8'))
    norm_stats = NormStats(tuple(stats[:3]), tuple(stats[3:]))
    model = StressNet(layers, input_shape=(channels, window_len), norm_stats=norm_stats)
    model.set_training(False)
    return model, norm_stats, provenance


def save_model(
        model: StressNet,
        norm_stats: NormStats | None,
        path: Path | str,
        provenance: dict | None = None,
        ) -> Path:
    '''Write the container atomically; a failed save never leaves a partial file.'''
    norm_stats = norm_stats if norm_stats is not None else model.norm_stats
    path = Path(path)
    atomic_write_bytes(path, encode_model(model, norm_stats, provenance))
    _logger.info(f'Saved model to {path}')
    return path


def read_container(path: Path | str) -> tuple[StressNet, NormStats, dict | None]:
    path = Path(path)
    if not path.exists():
        raise ContainerError(f'model file {path} does not exist')
    return decode_model(path.read_bytes())


def load_model(path: Path | str) -> tuple[StressNet, NormStats]:
    model, norm_stats, _ = read_container(path)
    return model, norm_stats


def default_model_path(name: str) -> Path:
    return settings.MODEL_DIR / f'{name}.strscnn'
