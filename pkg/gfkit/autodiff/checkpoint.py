"""
Binary parameter checkpoints. A checkpoint starts with the ``GFK1`` magic and
a little-endian u32 format version, followed by one record per tensor:

* name length (u64) and the UTF-8 encoded name
* rank (u64) and one u64 extent per axis
* the values as little-endian f64, in C order

Records follow each other until the end of the file.
"""

import logging
from pathlib import Path
import struct
from typing import Dict, Union

import numpy as np

from gfkit.exceptions import CheckpointError

MAGIC = b"GFK1"
VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = np.dtype("<f8")


def save_checkpoint(path: Union[str, Path], state: Dict[str, np.ndarray]) -> None:
    """
    Write the given named arrays into a checkpoint. Records are written in the
    iteration order of ``state``.

    :param path: Destination file, overwritten if exists
    :type path: Union[str, Path]

    :param state: Mapping of parameter names to arrays
    :type state: Dict[str, np.ndarray]
    """

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("wb") as file:
        file.write(MAGIC)
        file.write(_U32.pack(VERSION))

        for name, value in state.items():
            array = np.ascontiguousarray(value, dtype=_F64)
            encoded = name.encode("utf-8")

            file.write(_U64.pack(len(encoded)))
            file.write(encoded)
            file.write(_U64.pack(array.ndim))

            for extent in array.shape:
                file.write(_U64.pack(extent))

            file.write(array.tobytes(order="C"))

    logging.info('Checkpoint with %d tensors written to "%s"', len(state), path)


def _read(file, size: int, path: Path) -> bytes:
    data = file.read(size)

    if len(data) != size:
        raise CheckpointError(f'Checkpoint "{path}" is truncated')

    return data


def load_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """
    Read every record of a checkpoint, preserving the record order.

    :param path: Checkpoint file
    :type path: Union[str, Path]

    :return: Returns the named arrays
    :rtype: Dict[str, np.ndarray]

    :raises: ``CheckpointError`` if the file is not a valid checkpoint
    """

    path = Path(path)
    state: Dict[str, np.ndarray] = dict()

    with path.open("rb") as file:
        if file.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f'"{path}" is not a gfkit checkpoint')

        (version,) = _U32.unpack(_read(file, _U32.size, path))

        if version != VERSION:
            raise CheckpointError(
                f'Unsupported checkpoint version {version} in "{path}"'
            )

        while True:
            header = file.read(_U64.size)

            if not header:
                break

            if len(header) != _U64.size:
                raise CheckpointError(f'Checkpoint "{path}" is truncated')

            (name_length,) = _U64.unpack(header)
            name = _read(file, name_length, path).decode("utf-8")

            (rank,) = _U64.unpack(_read(file, _U64.size, path))
            shape = tuple(
                _U64.unpack(_read(file, _U64.size, path))[0] for _ in range(rank)
            )

            count = int(np.prod(shape, dtype=np.int64))
            raw = _read(file, count * _F64.itemsize, path)
            values = np.frombuffer(raw, dtype=_F64).astype(np.float64)
            state[name] = values.reshape(shape)

    logging.debug('Checkpoint with %d tensors loaded from "%s"', len(state), path)
    return state
