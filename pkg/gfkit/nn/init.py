"""
Parameter initializers. Every initializer draws from an explicit
``np.random.Generator`` so models are reproducible from a seed.

Inside :func:`deferred_init` initializers skip drawing values and return
uninitialized buffers instead; it is used to build full-size models only to
count their parameters.
"""

from contextlib import contextmanager
import threading
from typing import Iterator, Tuple

import numpy as np

from gfkit.nn.module import Parameter

Shape = Tuple[int, ...]

_STATE = threading.local()


@contextmanager
def deferred_init() -> Iterator[None]:
    previous = getattr(_STATE, "deferred", False)
    _STATE.deferred = True

    try:
        yield
    finally:
        _STATE.deferred = previous


def _is_deferred() -> bool:
    return getattr(_STATE, "deferred", False)


def zeros(shape: Shape) -> Parameter:
    if _is_deferred():
        return Parameter(np.empty(shape))

    return Parameter(np.zeros(shape))


def ones(shape: Shape) -> Parameter:
    if _is_deferred():
        return Parameter(np.empty(shape))

    return Parameter(np.ones(shape))


def normal(shape: Shape, std: float, rng: np.random.Generator) -> Parameter:
    if _is_deferred():
        return Parameter(np.empty(shape))

    return Parameter(rng.normal(0.0, std, size=shape))


def kaiming(shape: Shape, fan_in: int, rng: np.random.Generator) -> Parameter:
    """
    He-normal initialization for layers followed by a rectifier.
    """

    return normal(shape, np.sqrt(2.0 / fan_in), rng)
