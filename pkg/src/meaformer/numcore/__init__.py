"""Numerical core: tensors with reverse-mode autodiff, layers, Adam."""

from .tensor import (  # noqa: F401
    Tensor, no_grad, as_tensor, parameter,
    add, mul, matmul, reshape, transpose, getitem, concat,
    tsum, tmean, tabs, log, exp, clip,
    relu, sigmoid, softmax, dropout,
    linear, layernorm, conv2d, deconv2d, batchnorm_relu,
    upsample2x, plane_sample, planes_sample,
)
from .layers import (  # noqa: F401
    Module, ModuleList, Conv2d, ConvTranspose2d, BatchNorm2d,
    Linear, LayerNorm, Dropout, MultiHeadAttention,
)
from .optim import Adam, AdamConfig, adam_step  # noqa: F401
from .gradcheck import grad_check, adjoint_probe  # noqa: F401
from . import kernels  # noqa: F401
