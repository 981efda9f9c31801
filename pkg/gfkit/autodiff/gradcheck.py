"""
Central finite-difference validation of reverse-mode gradients.
"""

from typing import Callable, Optional, Sequence

import numpy as np

from gfkit.autodiff.tensor import Tensor, no_grad

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale, initial=0.0))


def gradcheck(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = DEFAULT_STEP,
    floor: float = DEFAULT_FLOOR,
    sample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Compare the gradients computed by ``backward`` against central
    differences ``(f(x + h) - f(x - h)) / 2h`` for every element of the given
    tensors and return the largest relative error.

    The relative error of an element is ``|a - n| / max(|a|, |n|, floor)``,
    so gradients which are zero in both computations do not divide by zero.

    Example usage:

    .. code-block:: python

        >>> import numpy as np
        >>> from gfkit.autodiff import Tensor, functional as F, gradcheck
        >>>
        >>> x = Tensor(np.random.rand(3, 4), requires_grad=True)
        >>> gradcheck(lambda: F.tanh(x).sum(), [x]) < 1e-4
        True

    :param fn: Closure evaluating a scalar loss from the tensors
    :type fn: Callable[[], Tensor]

    :param tensors: Leaf tensors which require gradients
    :type tensors: Sequence[Tensor]

    :param h: Finite difference step
    :type h: float

    :param floor: Lower bound of the relative error denominator
    :type floor: float

    :param sample: Number of elements checked per tensor, all if not set
    :type sample: Optional[int]

    :param rng: Random generator used to pick sampled elements
    :type rng: Optional[np.random.Generator]

    :return: Returns the largest relative error across all checked elements
    :rtype: float
    """

    rng = rng or np.random.default_rng(0)

    for tensor in tensors:
        tensor.zero_grad()

    fn().backward()

    worst = 0.0

    for tensor in tensors:
        analytic = (
            np.zeros(tensor.shape) if tensor.grad is None else tensor.grad.copy()
        )
        flat = tensor.data.reshape(-1)
        indices = np.arange(flat.size)

        if sample is not None and sample < flat.size:
            indices = rng.choice(flat.size, size=sample, replace=False)

        numeric = np.zeros(indices.size)

        with no_grad():
            for position, index in enumerate(indices):
                original = flat[index]

                flat[index] = original + h
                upper = fn().item()
                flat[index] = original - h
                lower = fn().item()
                flat[index] = original

                numeric[position] = (upper - lower) / (2.0 * h)

        worst = max(
            worst, relative_error(analytic.reshape(-1)[indices], numeric, floor)
        )

    return worst
