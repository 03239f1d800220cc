# Tensors are plain float32 numpy arrays: `shape` gives the dimensions and
# `ravel()` the row-major data. This module holds the few helpers that give
# them the guarantees the kernels rely on.

import numpy as np

from stress_transfer.exceptions import InvalidArgumentError, ShapeError


DTYPE = np.float32


def as_tensor(values, dtype=DTYPE) -> np.ndarray:
    tensor = np.ascontiguousarray(values, dtype=dtype)
    if tensor.size == 0 or 0 in tensor.shape:
        raise ShapeError('tensor', 'all dimensions positive', list(tensor.shape))
    return tensor


def check_finite(tensor: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(tensor).all():
        bad = int(np.size(tensor) - np.isfinite(tensor).sum())
        raise InvalidArgumentError(f'{what} contains {bad} non-finite values')
    return tensor


def format_tensor(tensor: np.ndarray) -> str:
    '''
    Text form used for debugging and logs: a shape header line followed by the
    row-major values, one innermost row per line.
    '''
    tensor = np.asarray(tensor)
    header = f'Tensor shape=[{", ".join(str(d) for d in tensor.shape)}] dtype={tensor.dtype}'
    if tensor.ndim == 0:
        return f'{header}\n{float(tensor):.6g}'

    rows = tensor.reshape(-1, tensor.shape[-1])
    lines = [' '.join(f'{v:.6g}' for v in row) for row in rows]
    return '\n'.join([header] + lines)
