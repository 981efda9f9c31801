import numpy as np

from gfkit.autodiff import Tensor, gradcheck
from gfkit.autodiff.gradcheck import relative_error
from gfkit.autodiff.tensor import Function


class WrongSquare(Function):
    def forward(self, x, **kwargs):
        self.x = x
        return x * x

    def backward(self, grad):
        return (grad * self.x,)


def test_relative_error_uses_floor():
    assert relative_error(np.zeros(3), np.zeros(3), 1e-3) == 0.0
    assert relative_error(np.array([1e-6]), np.array([0.0]), 1e-3) == 1e-3


def test_correct_gradient_passes():
    x = Tensor(np.linspace(-1.0, 1.0, 5), requires_grad=True)

    assert gradcheck(lambda: (x * x * x).sum(), [x]) < 1e-6


def test_wrong_gradient_is_detected():
    x = Tensor(np.linspace(0.5, 1.5, 5), requires_grad=True)

    assert gradcheck(lambda: WrongSquare.apply(x).sum(), [x]) > 0.4


def test_sampling_checks_a_subset():
    x = Tensor(np.random.default_rng(0).normal(size=(10, 10)), requires_grad=True)
    original = x.data.copy()

    error = gradcheck(lambda: (x * x).sum(), [x], sample=7)

    assert error < 1e-6
    assert np.array_equal(x.data, original)


def test_unused_tensor_has_zero_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    unused = Tensor([3.0], requires_grad=True)

    assert gradcheck(lambda: (x * 2.0).sum(), [x, unused]) < 1e-6
