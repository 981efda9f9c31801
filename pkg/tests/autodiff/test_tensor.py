import numpy as np
import pytest

from gfkit.autodiff import Graph, Tensor, backward, no_grad
from gfkit.autodiff import functional as F
from gfkit.exceptions import ShapeError


def test_tensor_is_float64_and_contiguous():
    tensor = Tensor([[1, 2], [3, 4]])

    assert tensor.data.dtype == np.float64
    assert tensor.data.flags["C_CONTIGUOUS"]
    assert tensor.shape == (2, 2)
    assert tensor.ndim == 2
    assert tensor.size == 4
    assert tensor.is_leaf
    assert tensor.grad is None


def test_item_of_single_element():
    assert Tensor([[3.5]]).item() == 3.5


def test_item_of_many_elements():
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()


def test_backward_of_product():
    x = Tensor([2.0, 3.0], requires_grad=True)
    y = Tensor([5.0, 7.0], requires_grad=True)

    (x * y).sum().backward()

    assert np.array_equal(x.grad, [5.0, 7.0])
    assert np.array_equal(y.grad, [2.0, 3.0])


def test_backward_fan_out_accumulates():
    x = Tensor([1.0, -2.0], requires_grad=True)

    loss = (x * x + x * 3.0).sum()
    backward(loss)

    assert np.allclose(x.grad, 2.0 * x.data + 3.0)


def test_backward_accumulates_into_existing_gradient():
    x = Tensor([1.0], requires_grad=True)

    (x * 2.0).sum().backward()
    (x * 2.0).sum().backward()

    assert np.array_equal(x.grad, [4.0])

    x.zero_grad()
    assert x.grad is None


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)

    with pytest.raises(ShapeError):
        backward(x * 2.0)


def test_backward_leaves_constants_untouched():
    x = Tensor([1.0, 2.0], requires_grad=True)
    constant = Tensor([4.0, 4.0])

    (x * constant).sum().backward()

    assert constant.grad is None


def test_scalar_operand_broadcast():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    scale = Tensor(2.0, requires_grad=True)

    (x * scale).sum().backward()

    assert np.array_equal(x.grad, np.full((2, 3), 2.0))
    assert scale.grad.shape == ()
    assert scale.grad == 6.0


def test_mismatched_shapes_are_rejected():
    with pytest.raises(ShapeError):
        Tensor(np.ones(3)) + Tensor(np.ones(4))


def test_no_grad_disables_recording():
    x = Tensor([1.0], requires_grad=True)

    with no_grad():
        y = x * 2.0

    assert not y.requires_grad
    assert y.creator is None
    assert (x * 2.0).requires_grad


def test_detach_cuts_the_graph():
    x = Tensor([1.0], requires_grad=True)
    detached = (x * 2.0).detach()

    assert detached.is_leaf
    assert not detached.requires_grad


def test_graph_is_topologically_ordered():
    x = Tensor([1.0], requires_grad=True)
    hidden = x * 2.0
    output = (hidden + x).sum()

    graph = Graph.from_output(output)
    positions = {id(node): index for index, node in enumerate(graph.nodes)}

    assert len(graph) == 4
    assert graph.nodes[-1] is output
    assert positions[id(x)] < positions[id(hidden)] < positions[id(output)]


def test_deep_chain_does_not_recurse():
    x = Tensor([1.0], requires_grad=True)
    y = x

    for _ in range(5000):
        y = y * 1.0

    y.sum().backward()

    assert np.array_equal(x.grad, [1.0])


def test_operators_match_numpy():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.5, -1.0], [2.0, 0.25]])

    assert np.allclose((Tensor(a) - Tensor(b)).numpy(), a - b)
    assert np.allclose((1.0 - Tensor(a)).numpy(), 1.0 - a)
    assert np.allclose((Tensor(a) / Tensor(b)).numpy(), a / b)
    assert np.allclose((2.0 / Tensor(a)).numpy(), 2.0 / a)
    assert np.allclose((-Tensor(a)).numpy(), -a)
    assert np.allclose((Tensor(a) @ Tensor(b)).numpy(), a @ b)
    assert np.allclose(Tensor(a).reshape(4).numpy(), a.reshape(4))
    assert np.allclose(Tensor(a).permute(1, 0).numpy(), a.T)
    assert np.allclose(Tensor(a)[0].numpy(), a[0])
    assert Tensor(a).mean().item() == 2.5
    assert np.allclose(Tensor(a).sum(axis=0).numpy(), a.sum(axis=0))


def test_reshape_rejects_wrong_size():
    with pytest.raises(ShapeError):
        F.reshape(Tensor(np.ones(6)), (4,))


def test_permute_rejects_wrong_axes():
    with pytest.raises(ShapeError):
        F.permute(Tensor(np.ones((2, 3))), (0, 0))
