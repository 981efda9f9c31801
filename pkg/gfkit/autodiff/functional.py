"""
The operator set of the autodiff engine. Every operation is a
:class:`gfkit.autodiff.tensor.Function` subclass and has a lowercase
functional wrapper which is the public entry point.

Elementwise operations require identical shapes; the only broadcasting
supported is a single-element tensor (or Python number) combined with a
tensor of any shape.
"""

from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from gfkit.autodiff.tensor import Function, Tensor
from gfkit.exceptions import ConfigurationError, ShapeError

Operand = Union[Tensor, float, int]
Axis = Optional[Union[int, Tuple[int, ...]]]

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def as_tensor(value: Operand) -> Tensor:
    if isinstance(value, Tensor):
        return value

    return Tensor(value, requires_grad=False)


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sum a gradient back to the shape of a scalar operand.
    """

    if grad.shape == shape:
        return grad

    return np.full(shape, grad.sum())


def _check_binary(name: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} do not match")


def _normalize_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} is out of range for a tensor of rank {ndim}")

    return axis % ndim


class _Binary(Function):
    def _shapes(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        return self.tensors[0].shape, self.tensors[1].shape


class Add(_Binary):
    def forward(self, a, b, **kwargs):
        _check_binary("add", a, b)
        return a + b

    def backward(self, grad):
        shape_a, shape_b = self._shapes()
        return _reduce_to(grad, shape_a), _reduce_to(grad, shape_b)


class Sub(_Binary):
    def forward(self, a, b, **kwargs):
        _check_binary("sub", a, b)
        return a - b

    def backward(self, grad):
        shape_a, shape_b = self._shapes()
        return _reduce_to(grad, shape_a), _reduce_to(-grad, shape_b)


class Mul(_Binary):
    def forward(self, a, b, **kwargs):
        _check_binary("mul", a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        shape_a, shape_b = self._shapes()
        return _reduce_to(grad * self.b, shape_a), _reduce_to(grad * self.a, shape_b)


class Div(_Binary):
    def forward(self, a, b, **kwargs):
        _check_binary("div", a, b)
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        shape_a, shape_b = self._shapes()
        grad_a = grad / self.b
        grad_b = -grad * self.a / (self.b * self.b)
        return _reduce_to(grad_a, shape_a), _reduce_to(grad_b, shape_b)


class Exp(Function):
    def forward(self, x, **kwargs):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x, **kwargs):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Tanh(Function):
    def forward(self, x, **kwargs):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class Sigmoid(Function):
    def forward(self, x, **kwargs):
        # exp of a non-positive argument only, so it never overflows
        decay = np.exp(-np.abs(x))
        self.out = np.where(x >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Gelu(Function):
    def forward(self, x, **kwargs):
        self.x = x
        self.cdf = 0.5 * (1.0 + erf(x / _SQRT_2))
        return x * self.cdf

    def backward(self, grad):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * self.x * self.x)
        return (grad * (self.cdf + self.x * pdf),)


class Relu(Function):
    def forward(self, x, **kwargs):
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


class MatMul(Function):
    """
    ``a @ b`` where either ``b`` is a matrix applied to the last axis of ``a``
    or both operands carry identical leading batch axes.
    """

    def forward(self, a, b, **kwargs):
        if a.ndim < 1 or b.ndim < 2:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not matrices")

        if b.ndim == 2:
            if a.shape[-1] != b.shape[0]:
                raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")
        elif a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")

        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        a, b = self.a, self.b

        if b.ndim == 2:
            grad_a = grad @ b.T
            grad_b = a.reshape(-1, a.shape[-1]).T @ grad.reshape(-1, b.shape[1])
            return grad_a, grad_b

        return grad @ np.swapaxes(b, -1, -2), np.swapaxes(a, -1, -2) @ grad


class Linear(Function):
    """
    Affine map over the last axis: ``x @ weight + bias``.
    """

    def forward(self, x, weight, bias=None, **kwargs):
        if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
            raise ShapeError(
                f"linear: input {x.shape} does not match weight {weight.shape}"
            )

        if bias is not None and bias.shape != (weight.shape[1],):
            raise ShapeError(
                f"linear: bias {bias.shape} does not match weight {weight.shape}"
            )

        self.x, self.weight = x, weight
        out = x @ weight

        if bias is not None:
            out = out + bias

        return out

    def backward(self, grad):
        flat_grad = grad.reshape(-1, self.weight.shape[1])
        grad_x = grad @ self.weight.T
        grad_w = self.x.reshape(-1, self.weight.shape[0]).T @ flat_grad

        if len(self.tensors) == 3:
            return grad_x, grad_w, flat_grad.sum(axis=0)

        return grad_x, grad_w


class Softmax(Function):
    def forward(self, x, axis=-1, **kwargs):
        self.axis = axis
        shifted = np.exp(x - x.max(axis=axis, keepdims=True))
        self.out = shifted / shifted.sum(axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        inner = (grad * self.out).sum(axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


class LogSoftmax(Function):
    def forward(self, x, axis=-1, **kwargs):
        self.axis = axis
        shifted = x - x.max(axis=axis, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - log_norm
        self.softmax = np.exp(out)
        return out

    def backward(self, grad):
        total = grad.sum(axis=self.axis, keepdims=True)
        return (grad - self.softmax * total,)


def _normalize_rows(
    rows: np.ndarray, eps: float
) -> Tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=-1, keepdims=True)
    centered = rows - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    return centered * rstd, rstd


def _normalize_rows_backward(
    grad_xhat: np.ndarray, xhat: np.ndarray, rstd: np.ndarray
) -> np.ndarray:
    mean_grad = grad_xhat.mean(axis=-1, keepdims=True)
    mean_proj = (grad_xhat * xhat).mean(axis=-1, keepdims=True)
    return rstd * (grad_xhat - mean_grad - xhat * mean_proj)


class LayerNorm(Function):
    """
    Normalization over the last axis followed by a per-channel affine map.
    """

    def forward(self, x, weight, bias, eps=1e-5, **kwargs):
        channels = x.shape[-1]

        if weight.shape != (channels,) or bias.shape != (channels,):
            raise ShapeError(
                f"layer_norm: input {x.shape} does not match affine "
                f"{weight.shape}/{bias.shape}"
            )

        self.xhat, self.rstd = _normalize_rows(x, eps)
        self.weight = weight
        return self.xhat * weight + bias

    def backward(self, grad):
        reduce_axes = tuple(range(grad.ndim - 1))
        grad_w = (grad * self.xhat).sum(axis=reduce_axes)
        grad_b = grad.sum(axis=reduce_axes)
        grad_x = _normalize_rows_backward(grad * self.weight, self.xhat, self.rstd)
        return grad_x, grad_w, grad_b


class GroupNorm(Function):
    """
    Normalization of ``(N, C, ...)`` inputs over groups of channels together
    with all trailing axes, followed by a per-channel affine map.
    """

    def forward(self, x, weight, bias, groups=1, eps=1e-5, **kwargs):
        if x.ndim < 2:
            raise ShapeError(f"group_norm: input {x.shape} has no channel axis")

        channels = x.shape[1]

        if groups < 1 or channels % groups:
            raise ConfigurationError(
                f"group_norm: {channels} channels are not divisible "
                f"into {groups} groups"
            )

        if weight.shape != (channels,) or bias.shape != (channels,):
            raise ShapeError(
                f"group_norm: input {x.shape} does not match affine "
                f"{weight.shape}/{bias.shape}"
            )

        self.input_shape = x.shape
        self.groups = groups
        self.affine_shape = (1, channels) + (1,) * (x.ndim - 2)

        xhat, self.rstd = _normalize_rows(x.reshape(x.shape[0], groups, -1), eps)
        self.xhat = xhat.reshape(x.shape)
        self.weight = weight.reshape(self.affine_shape)
        return self.xhat * self.weight + bias.reshape(self.affine_shape)

    def backward(self, grad):
        reduce_axes = (0,) + tuple(range(2, grad.ndim))
        grad_w = (grad * self.xhat).sum(axis=reduce_axes)
        grad_b = grad.sum(axis=reduce_axes)

        rows = (self.input_shape[0], self.groups, -1)
        grad_x = _normalize_rows_backward(
            (grad * self.weight).reshape(rows), self.xhat.reshape(rows), self.rstd
        )
        return grad_x.reshape(self.input_shape), grad_w, grad_b


class Reshape(Function):
    def forward(self, x, shape=(), **kwargs):
        self.input_shape = x.shape

        try:
            return x.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"reshape: cannot reshape {x.shape} into {shape}") from exc

    def backward(self, grad):
        return (grad.reshape(self.input_shape),)


class Permute(Function):
    def forward(self, x, axes=(), **kwargs):
        if sorted(axes) != list(range(x.ndim)):
            raise ShapeError(f"permute: axes {axes} do not match shape {x.shape}")

        self.inverse = tuple(np.argsort(axes))
        return np.ascontiguousarray(np.transpose(x, axes))

    def backward(self, grad):
        return (np.transpose(grad, self.inverse),)


class Concat(Function):
    def forward(self, *arrays, axis=0, **kwargs):
        first = arrays[0]
        axis = _normalize_axis(axis, first.ndim)

        for other in arrays[1:]:
            same_rank = other.ndim == first.ndim
            if not same_rank or any(
                other.shape[i] != first.shape[i] for i in range(first.ndim) if i != axis
            ):
                raise ShapeError(
                    f"concat: shapes {[a.shape for a in arrays]} differ "
                    f"outside axis {axis}"
                )

        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class GetItem(Function):
    """
    Basic slicing (integers and slices). Used for crops and for reading
    single time steps.
    """

    def forward(self, x, index=(), **kwargs):
        self.input_shape = x.shape
        self.index = index
        return x[index]

    def backward(self, grad):
        full = np.zeros(self.input_shape)
        full[self.index] = grad
        return (full,)


class Roll(Function):
    def forward(self, x, shifts=(), axes=(), **kwargs):
        self.shifts, self.axes = tuple(shifts), tuple(axes)
        return np.roll(x, self.shifts, axis=self.axes)

    def backward(self, grad):
        return (np.roll(grad, tuple(-s for s in self.shifts), axis=self.axes),)


class Upsample2x(Function):
    """
    Nearest-neighbour doubling of the last two axes.
    """

    def forward(self, x, **kwargs):
        if x.ndim < 2:
            raise ShapeError(f"upsample2x: input {x.shape} has no spatial axes")

        return x.repeat(2, axis=-2).repeat(2, axis=-1)

    def backward(self, grad):
        height, width = grad.shape[-2] // 2, grad.shape[-1] // 2
        blocks = grad.reshape(grad.shape[:-2] + (height, 2, width, 2))
        return (blocks.sum(axis=(-3, -1)),)


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False, **kwargs):
        self.input_shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if not self.keepdims and self.axis is not None:
            grad = np.expand_dims(grad, self.axis)

        return (np.broadcast_to(grad, self.input_shape).copy(),)


class Mean(Sum):
    def forward(self, x, axis=None, keepdims=False, **kwargs):
        total = super().forward(x, axis=axis, keepdims=keepdims)
        self.count = x.size // max(total.size, 1)
        return total / self.count

    def backward(self, grad):
        (full,) = super().backward(grad)
        return (full / self.count,)


class Conv2d(Function):
    """
    Cross-correlation of ``(N, C, H, W)`` inputs with ``(O, C, kh, kw)``
    kernels, symmetric zero padding and a common stride.
    """

    def forward(self, x, weight, bias=None, stride=1, padding=0, **kwargs):
        if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
            raise ShapeError(
                f"conv2d: input {x.shape} does not match kernel {weight.shape}"
            )

        if bias is not None and bias.shape != (weight.shape[0],):
            raise ShapeError(
                f"conv2d: bias {bias.shape} does not match kernel {weight.shape}"
            )

        kernel_h, kernel_w = weight.shape[2:]
        padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

        if padded.shape[2] < kernel_h or padded.shape[3] < kernel_w:
            raise ShapeError(
                f"conv2d: kernel {weight.shape} is larger than padded input "
                f"{padded.shape}"
            )

        windows = sliding_window_view(padded, (kernel_h, kernel_w), axis=(2, 3))
        windows = windows[:, :, ::stride, ::stride]

        self.windows = windows
        self.weight = weight
        self.stride, self.padding = stride, padding
        self.input_shape, self.padded_shape = x.shape, padded.shape

        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2)

        if bias is not None:
            out = out + bias.reshape(1, -1, 1, 1)

        return np.ascontiguousarray(out)

    def backward(self, grad):
        stride, padding = self.stride, self.padding
        out_h, out_w = grad.shape[2:]
        kernel_h, kernel_w = self.weight.shape[2:]

        grad_w = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_padded = np.zeros(self.padded_shape)

        for i in range(kernel_h):
            for j in range(kernel_w):
                tap = np.tensordot(grad, self.weight[:, :, i, j], axes=([1], [0]))
                grad_padded[
                    :,
                    :,
                    i : i + stride * (out_h - 1) + 1 : stride,
                    j : j + stride * (out_w - 1) + 1 : stride,
                ] += tap.transpose(0, 3, 1, 2)

        height, width = self.input_shape[2:]
        rows = slice(padding, padding + height)
        cols = slice(padding, padding + width)
        grad_x = grad_padded[:, :, rows, cols]

        if len(self.tensors) == 3:
            return grad_x, grad_w, grad.sum(axis=(0, 2, 3))

        return grad_x, grad_w


class Conv1d(Function):
    """
    Cross-correlation along one chosen axis of a channels-last input with
    ``(O, C, k)`` kernels and symmetric zero padding. All other axes are
    treated as independent positions.
    """

    def forward(self, x, weight, bias=None, axis=1, padding=0, **kwargs):
        axis = _normalize_axis(axis, x.ndim)

        if axis == x.ndim - 1:
            raise ShapeError("conv1d: the convolved axis cannot be the channel axis")

        if weight.ndim != 3 or x.shape[-1] != weight.shape[1]:
            raise ShapeError(
                f"conv1d: input {x.shape} does not match kernel {weight.shape}"
            )

        if bias is not None and bias.shape != (weight.shape[0],):
            raise ShapeError(
                f"conv1d: bias {bias.shape} does not match kernel {weight.shape}"
            )

        kernel = weight.shape[2]
        moved = np.moveaxis(x, axis, -2)
        pad_width = [(0, 0)] * moved.ndim
        pad_width[-2] = (padding, padding)
        padded = np.pad(moved, pad_width)

        if padded.shape[-2] < kernel:
            raise ShapeError(
                f"conv1d: kernel {weight.shape} is longer than padded input "
                f"{padded.shape}"
            )

        self.windows = sliding_window_view(padded, kernel, axis=-2)
        self.weight = weight
        self.axis, self.padding = axis, padding
        self.moved_shape, self.padded_shape = moved.shape, padded.shape

        out = np.tensordot(self.windows, weight, axes=([-2, -1], [1, 2]))

        if bias is not None:
            out = out + bias

        return np.ascontiguousarray(np.moveaxis(out, -2, axis))

    def backward(self, grad):
        moved = np.moveaxis(grad, self.axis, -2)
        positions = list(range(moved.ndim - 1))
        length = moved.shape[-2]

        grad_w = np.tensordot(moved, self.windows, axes=(positions, positions))
        grad_padded = np.zeros(self.padded_shape)

        for tap in range(self.weight.shape[2]):
            grad_padded[..., tap : tap + length, :] += moved @ self.weight[:, :, tap]

        size = self.moved_shape[-2]
        grad_x = grad_padded[..., self.padding : self.padding + size, :]
        grad_x = np.moveaxis(grad_x, -2, self.axis)

        if len(self.tensors) == 3:
            return grad_x, grad_w, moved.sum(axis=tuple(positions))

        return grad_x, grad_w


def add(a: Operand, b: Operand) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Operand, b: Operand) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Operand, b: Operand) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def div(a: Operand, b: Operand) -> Tensor:
    return Div.apply(as_tensor(a), as_tensor(b))


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def log(x: Tensor) -> Tensor:
    return Log.apply(x)


def tanh(x: Tensor) -> Tensor:
    return Tanh.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def gelu(x: Tensor) -> Tensor:
    return Gelu.apply(x)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def silu(x: Tensor) -> Tensor:
    return mul(x, sigmoid(x))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    if bias is None:
        return Linear.apply(x, weight)

    return Linear.apply(x, weight, bias)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)


def layer_norm(x: Tensor, weight: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, weight, bias, eps=eps)


def group_norm(
    x: Tensor, weight: Tensor, bias: Tensor, groups: int, eps: float = 1e-5
) -> Tensor:
    return GroupNorm.apply(x, weight, bias, groups=groups, eps=eps)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    return Permute.apply(x, axes=tuple(axes))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat: no tensors given")

    return Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """
    Join equally shaped tensors along a new axis.
    """

    expanded: List[Tensor] = []

    for tensor in tensors:
        position = _normalize_axis(axis, tensor.ndim + 1)
        shape = tensor.shape[:position] + (1,) + tensor.shape[position:]
        expanded.append(reshape(tensor, shape))

    return concat(expanded, axis=axis)


def getitem(x: Tensor, index: Any) -> Tensor:
    return GetItem.apply(x, index=index)


def crop(x: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    """
    Crop the last two axes to the given window.
    """

    if top < 0 or left < 0 or top + height > x.shape[-2] or left + width > x.shape[-1]:
        raise ShapeError(
            f"crop: window ({top}, {left}, {height}, {width}) exceeds shape {x.shape}"
        )

    index = (Ellipsis, slice(top, top + height), slice(left, left + width))
    return getitem(x, index)


def roll(x: Tensor, shifts: Sequence[int], axes: Sequence[int]) -> Tensor:
    return Roll.apply(x, shifts=tuple(shifts), axes=tuple(axes))


def upsample2x(x: Tensor) -> Tensor:
    return Upsample2x.apply(x)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    # pylint: disable=redefined-builtin
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(x, axis=axis, keepdims=keepdims)


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    tensors = (x, weight) if bias is None else (x, weight, bias)
    return Conv2d.apply(*tensors, stride=stride, padding=padding)


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    axis: int = 1,
    padding: int = 0,
) -> Tensor:
    tensors = (x, weight) if bias is None else (x, weight, bias)
    return Conv1d.apply(*tensors, axis=axis, padding=padding)
