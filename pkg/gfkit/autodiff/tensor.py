"""
This module contains the definition of the Tensor, the Function which records
an operation on tensors, and the reverse-mode traversal which fills the
gradients of every leaf that requires them.

Every learned computation of gfkit is expressed with tensors of this module.
Gradient recording is thread-local, so independent graphs can be evaluated
concurrently while a single graph is always recorded and traversed by one
thread.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from contextlib import contextmanager
import threading
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from gfkit.exceptions import ShapeError

ArrayLike = Union[np.ndarray, float, int, Sequence[Any]]

_STATE = threading.local()


def is_grad_enabled() -> bool:
    """
    Return whether operations executed by the current thread are recorded.
    """

    return getattr(_STATE, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable graph recording for the current thread within the context.

    Example usage:

    .. code-block:: python

        >>> from gfkit.autodiff import Tensor, no_grad
        >>>
        >>> weight = Tensor([1.0, 2.0], requires_grad=True)
        >>> with no_grad():
        >>>     doubled = weight * 2.0
        >>>
        >>> doubled.requires_grad
        False
    """

    previous = is_grad_enabled()
    _STATE.grad_enabled = False

    try:
        yield
    finally:
        _STATE.grad_enabled = previous


class Function(ABC):
    """
    Abstract class which describes a differentiable operation. A function
    receives the raw arrays of its input tensors in ``forward`` and returns the
    gradients of its inputs in ``backward``, given the gradient of its output.

    Functions are applied through :func:`Function.apply`, which takes care of
    wrapping the output into a tensor and recording the graph node.

    :param tensors: Input tensors of the operation
    :type tensors: Tensor
    """

    def __init__(self, *tensors: "Tensor") -> None:
        self.tensors: Tuple["Tensor", ...] = tensors

    def __repr__(self) -> str:
        shapes = ", ".join(str(tensor.shape) for tensor in self.tensors)
        return f"{self.__class__.__name__}({shapes})"

    @abstractmethod
    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        """
        Compute the output array from the input arrays.
        """

    @abstractmethod
    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        """
        Compute the gradient of every input from the gradient of the output.

        :param grad: Gradient of the loss with respect to the output
        :type grad: np.ndarray

        :return: One gradient (or None) per input tensor, in input order
        :rtype: Sequence[Optional[np.ndarray]]
        """

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        """
        Run the forward pass and record a graph node when any input requires
        a gradient and recording is enabled.
        """

        func = cls(*tensors)
        data = func.forward(*(tensor.data for tensor in tensors), **kwargs)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in tensors)

        return Tensor(
            data, requires_grad=requires_grad, creator=func if requires_grad else None
        )


class Tensor:
    """
    Dense N-dimensional array of double precision values with an optional
    gradient buffer. Tensors created by the user are leaves; tensors produced
    by a :class:`Function` keep a reference to it as ``creator``.

    :param data: Values of the tensor, converted to contiguous float64
    :type data: ArrayLike

    :param requires_grad: Whether the gradient of this tensor should be computed
    :type requires_grad: bool

    :param creator: The function which produced this tensor
    :type creator: Optional[Function]
    """

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        creator: Optional[Function] = None,
    ) -> None:
        self.data: np.ndarray = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.creator = creator

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(
                f"item() requires a single element, got shape {self.shape}"
            )

        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """
        Return a tensor sharing the values of this one, cut from the graph.
        """

        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __add__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.add(self, other)

    def __radd__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.add(other, self)

    def __sub__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.sub(self, other)

    def __rsub__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.sub(other, self)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.mul(self, other)

    def __rmul__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.mul(other, self)

    def __truediv__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.div(self, other)

    def __rtruediv__(self, other: Union["Tensor", float]) -> "Tensor":
        return F.div(other, self)

    def __neg__(self) -> "Tensor":
        return F.mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return F.matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return F.getitem(self, index)

    def reshape(self, *shape: int) -> "Tensor":
        return F.reshape(self, shape)

    def permute(self, *axes: int) -> "Tensor":
        return F.permute(self, axes)

    def sum(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        return F.mean(self, axis=axis, keepdims=keepdims)


class Graph:
    """
    The recorded computation behind a tensor. ``nodes`` holds every tensor
    which requires a gradient and contributes to the output, topologically
    ordered so that each node comes after all of its inputs.

    :param nodes: Topologically ordered tensors, output last
    :type nodes: List[Tensor]
    """

    def __init__(self, nodes: List[Tensor]) -> None:
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_output(cls, output: Tensor) -> "Graph":
        """
        Collect the graph with an iterative depth-first traversal; deep
        recurrences would exceed the interpreter's recursion limit otherwise.
        """

        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]

        while stack:
            node, expanded = stack.pop()

            if expanded:
                order.append(node)
                continue

            if id(node) in visited:
                continue

            visited.add(id(node))
            stack.append((node, True))

            if node.creator is not None:
                for parent in node.creator.tensors:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))

        return cls(order)


def backward(loss: Tensor) -> None:
    """
    Fill ``grad`` of every leaf reachable from ``loss`` which requires a
    gradient. Gradients accumulate into existing buffers, like repeated calls
    to a framework's ``backward``.

    :param loss: Scalar produced through recorded operations
    :type loss: Tensor

    :raises: ``ShapeError`` if the loss is not a scalar
    """

    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")

    if not loss.requires_grad:
        return

    graph = Graph.from_output(loss)
    grads = {id(loss): np.ones_like(loss.data)}

    for node in reversed(graph.nodes):
        grad = grads.pop(id(node), None)

        if grad is None:
            continue

        if node.creator is None:
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue

        input_grads = node.creator.backward(grad)

        for tensor, input_grad in zip(node.creator.tensors, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue

            if input_grad.shape != tensor.shape:
                raise ShapeError(
                    f"{node.creator!r} produced a gradient of shape "
                    f"{input_grad.shape} for an input of shape {tensor.shape}"
                )

            key = id(tensor)
            grads[key] = grads[key] + input_grad if key in grads else input_grad


# pylint: disable=wrong-import-position,cyclic-import
from gfkit.autodiff import functional as F  # noqa: E402
