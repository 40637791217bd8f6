"""Neural layers on top of the autodiff core.

A minimal Module system: attribute assignment registers parameters, buffers
are plain numpy arrays (BatchNorm running stats), `named_parameters` yields
dotted names for the optimizer and checkpointing.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError
from . import tensor as T
from .tensor import Tensor, parameter


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        self._buffers[name] = array
        object.__setattr__(self, name, array)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, m in self._modules.items():
            yield from m.named_buffers(prefix + name + ".")

    def modules(self):
        yield self
        for m in self._modules.values():
            yield from m.modules()

    def train(self, mode=True):
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, mods):
        super().__init__()
        self._list = list(mods)
        for i, m in enumerate(self._list):
            self._modules[str(i)] = m

    def __iter__(self):
        return iter(self._list)

    def __len__(self):
        return len(self._list)

    def __getitem__(self, i):
        return self._list[i]


def _he_normal(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)).astype(dtype)


def _xavier_uniform(rng, shape, fan_in, fan_out, dtype):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, shape).astype(dtype)


class Conv2d(Module):
    """2D convolution; pad defaults to "same" for stride 1 / odd kernels."""

    def __init__(self, cin, cout, ks, stride=1, pad=None, bias=True,
                 rng=None, dtype=np.float32):
        super().__init__()
        if ks < 1 or stride < 1 or cout < 1:
            raise ConfigError("conv: kernel size, stride and channels must be >= 1")
        rng = rng or np.random.default_rng()
        self.stride = stride
        self.pad = (ks - 1) // 2 if pad is None else pad
        self.weight = parameter(_he_normal(rng, (cout, cin, ks, ks), cin * ks * ks, dtype))
        self.bias = parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def forward(self, x):
        return T.conv2d(x, self.weight, self.bias, self.stride, self.pad)


class ConvTranspose2d(Module):
    def __init__(self, cin, cout, ks, stride=2, pad=1, bias=True,
                 rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng()
        self.stride = stride
        self.pad = pad
        self.weight = parameter(_he_normal(rng, (cin, cout, ks, ks), cin * ks * ks, dtype))
        self.bias = parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def forward(self, x):
        return T.deconv2d(x, self.weight, self.bias, self.stride, self.pad)


class BatchNorm2d(Module):
    """Batch normalization with optional fused ReLU."""

    def __init__(self, c, eps=1e-5, momentum=0.1, relu=True, dtype=np.float32):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.relu = relu
        self.gamma = parameter(np.ones(c, dtype=dtype))
        self.beta = parameter(np.zeros(c, dtype=dtype))
        self.register_buffer("running_mean", np.zeros(c, dtype=dtype))
        self.register_buffer("running_var", np.ones(c, dtype=dtype))

    def forward(self, x):
        return T.batchnorm_relu(x, self.gamma, self.beta,
                                self.running_mean, self.running_var,
                                self.training, self.momentum, self.eps,
                                apply_relu=self.relu)


class Linear(Module):
    def __init__(self, fin, fout, bias=True, rng=None, dtype=np.float32, zero_init=False):
        super().__init__()
        rng = rng or np.random.default_rng()
        if zero_init:
            w = np.zeros((fout, fin), dtype=dtype)
        else:
            w = _xavier_uniform(rng, (fout, fin), fin, fout, dtype)
        self.weight = parameter(w)
        self.bias = parameter(np.zeros(fout, dtype=dtype)) if bias else None

    def forward(self, x):
        return T.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5, dtype=np.float32):
        super().__init__()
        self.eps = eps
        self.gamma = parameter(np.ones(dim, dtype=dtype))
        self.beta = parameter(np.zeros(dim, dtype=dtype))

    def forward(self, x):
        return T.layernorm(x, self.gamma, self.beta, self.eps)


class Dropout(Module):
    """Train-only inverted dropout; masks come from the shared model rng."""

    def __init__(self, p, rng):
        super().__init__()
        self.p = p
        self.rng = rng

    def forward(self, x):
        return T.dropout(x, self.p, self.rng, self.training)


class MultiHeadAttention(Module):
    """Standard scaled dot-product attention with n_heads heads.

    Query/key position embeddings are added by the caller; this module only
    projects, attends and re-projects.  Queries are pre-scaled by 1/sqrt(d)
    so the big score matrix is touched once.
    """

    def __init__(self, c, n_heads, dropout_p=0.0, rng=None, dtype=np.float32):
        super().__init__()
        if c % n_heads != 0:
            raise ConfigError(f"model dim {c} not divisible by n_heads {n_heads}")
        self.n_heads = n_heads
        self.d_head = c // n_heads
        self.q_proj = Linear(c, c, rng=rng, dtype=dtype)
        self.k_proj = Linear(c, c, rng=rng, dtype=dtype)
        self.v_proj = Linear(c, c, rng=rng, dtype=dtype)
        self.out_proj = Linear(c, c, rng=rng, dtype=dtype)

    def _split(self, x, n, t):
        # (N, T, C) -> (N, h, T, d)
        return T.transpose(T.reshape(x, (n, t, self.n_heads, self.d_head)), (0, 2, 1, 3))

    def forward(self, q, k, v, return_weights=False):
        n, tq, c = q.shape
        tk = k.shape[1]
        qh = self._split(self.q_proj(q), n, tq) * (1.0 / math.sqrt(self.d_head))
        kh = self._split(self.k_proj(k), n, tk)
        vh = self._split(self.v_proj(v), n, tk)
        attn = T.softmax(T.matmul(qh, T.transpose(kh, (0, 1, 3, 2))), axis=-1)
        out = T.matmul(attn, vh)                        # (N, h, Tq, d)
        out = T.reshape(T.transpose(out, (0, 2, 1, 3)), (n, tq, c))
        out = self.out_proj(out)
        if return_weights:
            return out, attn
        return out
