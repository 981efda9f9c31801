# flake8: noqa
from gfkit.autodiff import functional
from gfkit.autodiff.checkpoint import load_checkpoint, save_checkpoint
from gfkit.autodiff.gradcheck import gradcheck
from gfkit.autodiff.tensor import Function, Graph, Tensor, backward, no_grad
