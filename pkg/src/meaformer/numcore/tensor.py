"""Dense tensors with reverse-mode automatic differentiation.

A tape-free graph: every op closes over its inputs and a vjp callback; calling
``backward()`` on a scalar walks the graph in reverse topological order and
accumulates gradients into the leaves.  Data lives in contiguous row-major
numpy arrays; float32 is the training precision, float64 the gradient-check
precision.

Setting MEAF_DEBUG=1 turns on NaN/Inf assertions on every op output.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ContractViolation
from . import kernels as K

DEBUG_CHECKS = os.environ.get("MEAF_DEBUG", "") not in ("", "0")

_grad_enabled = [True]


class no_grad:
    """Context manager disabling graph construction (inference / oracles)."""

    def __enter__(self):
        _grad_enabled.append(False)
        return self

    def __exit__(self, *exc):
        _grad_enabled.pop()
        return False


def _assert_finite(data):
    if DEBUG_CHECKS and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite value in tensor data")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None and arr.dtype != dtype:
            arr = arr.astype(dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        # ascontiguousarray would promote 0-dim to 1-dim; keep scalars 0-dim
        self.data = arr if arr.ndim == 0 else np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    # -- autodiff ------------------------------------------------------------

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ContractViolation("backward() without a gradient needs a scalar")
            grad = np.ones_like(self.data)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.data.shape)
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    # take ownership when the vjp allocated a fresh array;
                    # copy if it aliased its input or returned a view
                    if g is node.grad or g.base is not None:
                        parent.grad = g.copy()
                    else:
                        parent.grad = g
                else:
                    parent.grad += g

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x), dtype=dtype)


def parameter(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype)


def _make(data, parents, vjp) -> Tensor:
    _assert_finite(data)
    out = Tensor.__new__(Tensor)
    out.data = data if data.flags["C_CONTIGUOUS"] else np.ascontiguousarray(data)
    out.grad = None
    out._parents = ()
    out._vjp = None
    out.requires_grad = False
    if _grad_enabled[-1] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic ----------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape),
                                         _unbroadcast(g, b.data.shape)))


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        a = as_tensor(a)
        s = a.data.dtype.type(b)
        return _make(a.data * s, (a,), lambda g: (g * s,))
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                         _unbroadcast(g * a.data, b.data.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    inv = 1.0 / b.data
    out = a.data * inv

    def vjp(g):
        return (_unbroadcast(g * inv, a.data.shape),
                _unbroadcast(-g * out * inv, b.data.shape))

    return _make(out, (a, b), vjp)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data @ b.data

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _make(out, (a, b), vjp)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    return _make(np.reshape(a.data, shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)
    return _make(np.ascontiguousarray(np.transpose(a.data, axes)), (a,),
                 lambda g: (np.transpose(g, inv),))


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    out = a.data[idx]

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[idx] = g
        return (ga,)

    return _make(np.ascontiguousarray(out), (a,), vjp)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), vjp)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=True),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).astype(a.data.dtype, copy=True),)

    return _make(np.asarray(out), (a,), vjp)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.data.shape[i] for i in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def tabs(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (g * sign,))


def log(a) -> Tensor:
    a = as_tensor(a)
    inv = 1.0 / a.data
    return _make(np.log(a.data), (a,), lambda g: (g * inv,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def clip(a, lo, hi) -> Tensor:
    """Clamp values; gradient passes only through unclamped entries."""
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)
    mask = ((a.data > lo) & (a.data < hi)).astype(a.data.dtype)
    return _make(out, (a,), lambda g: (g * mask,))


# -- activations ---------------------------------------------------------------


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0  # subgradient 0 at 0
    return _make(np.where(mask, a.data, a.data.dtype.type(0)), (a,),
                 lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (a,), vjp)


def dropout(a, p, rng, training) -> Tensor:
    """Inverted dropout; identity when eval or p == 0.  Mask drawn from rng."""
    a = as_tensor(a)
    if not training or p <= 0.0:
        return a
    draw = rng.random(a.data.shape, dtype=np.float32)
    keep = (draw >= p).astype(a.data.dtype) / a.data.dtype.type(1.0 - p)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


# -- structured ops --------------------------------------------------------------


def linear(x, w, b=None) -> Tensor:
    """x (..., fin) @ w (fout, fin)^T + b."""
    out = matmul(x, transpose(w, (1, 0)))
    if b is not None:
        out = add(out, b)
    return out


def layernorm(x, gamma, beta, eps=1e-5) -> Tensor:
    """Normalize the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data
    n = x.data.shape[-1]

    def vjp(g):
        dgamma = _unbroadcast(g * xhat, gamma.data.shape)
        dbeta = _unbroadcast(g, beta.data.shape)
        dxhat = g * gamma.data
        dx = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        return dx.astype(x.data.dtype), dgamma, dbeta

    return _make(out.astype(x.data.dtype), (x, gamma, beta), vjp)


def conv2d(x, w, b=None, stride=1, pad=0) -> Tensor:
    """Cross-correlation of (N,C,H,W) with (O,C,kh,kw) weights."""
    x, w = as_tensor(x), as_tensor(w)
    n, c, h, wd = x.data.shape
    o, cw, ks, ks2 = w.data.shape
    if ks != ks2:
        raise ContractViolation("conv2d expects square kernels")
    if c != cw:
        raise ContractViolation(f"conv2d channel mismatch: input {c} vs weights {cw}")
    ho = K.conv_out_size(h, ks, stride, pad)
    wo = K.conv_out_size(wd, ks, stride, pad)
    if ho <= 0 or wo <= 0:
        raise ContractViolation("conv2d output would be empty")
    cols = K.im2col(x.data, ks, stride, pad)          # (N, C*ks*ks, Ho*Wo)
    w2 = w.data.reshape(o, -1)
    y = (w2 @ cols).reshape(n, o, ho, wo)
    if b is not None:
        bt = as_tensor(b)
        y = y + bt.data.reshape(1, o, 1, 1)
        parents = (x, w, bt)
    else:
        parents = (x, w)

    def vjp(g):
        g2 = g.reshape(n, o, ho * wo)
        gw = (g2 @ cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape)
        gcols = np.ascontiguousarray(np.swapaxes(w2, 0, 1) @ g2)
        gx = K.col2im(gcols, n, c, h, wd, ks, stride, pad)
        if b is not None:
            return gx, gw, g.sum(axis=(0, 2, 3))
        return gx, gw

    return _make(y, parents, vjp)


def deconv2d(x, w, b=None, stride=1, pad=0) -> Tensor:
    """Transposed convolution, the exact adjoint of conv2d with shared weights.

    x (N,Cin,H,W), w (Cin,Cout,kh,kw) -> (N, Cout, (H-1)*stride - 2*pad + ks, ...).
    """
    x, w = as_tensor(x), as_tensor(w)
    n, cin, h, wd = x.data.shape
    cw, cout, ks, ks2 = w.data.shape
    if ks != ks2:
        raise ContractViolation("deconv2d expects square kernels")
    if cin != cw:
        raise ContractViolation(f"deconv2d channel mismatch: input {cin} vs weights {cw}")
    ho = (h - 1) * stride - 2 * pad + ks
    wo = (wd - 1) * stride - 2 * pad + ks
    if ho <= 0 or wo <= 0:
        raise ContractViolation("deconv2d output would be empty")
    w2 = w.data.reshape(cin, -1)                       # (Cin, Cout*ks*ks)
    x2 = x.data.reshape(n, cin, h * wd)
    cols = np.ascontiguousarray(np.swapaxes(w2, 0, 1) @ x2)   # (N, Cout*ks*ks, H*W)
    y = K.col2im(cols, n, cout, ho, wo, ks, stride, pad)
    if b is not None:
        bt = as_tensor(b)
        y = y + bt.data.reshape(1, cout, 1, 1)
        parents = (x, w, bt)
    else:
        parents = (x, w)

    def vjp(g):
        gcols = K.im2col(g, ks, stride, pad)           # (N, Cout*ks*ks, H*W)
        gx = (w2 @ gcols).reshape(x.data.shape)
        gw = (x2 @ gcols.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape)
        if b is not None:
            return gx, gw, g.sum(axis=(0, 2, 3))
        return gx, gw

    return _make(y, parents, vjp)


def batchnorm_relu(x, gamma, beta, running_mean, running_var, training,
                   momentum=0.1, eps=1e-5, apply_relu=True) -> Tensor:
    """Per-channel batch normalization over (N,H,W), optional fused ReLU.

    Training mode normalizes with batch statistics and updates the running
    buffers in place (no gradient flows through them); eval mode uses the
    stored statistics.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    xd = x.data
    axes = (0, 2, 3)
    shape = (1, -1, 1, 1)
    if training:
        mu = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        cnt = xd.shape[0] * xd.shape[2] * xd.shape[3]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (cnt / max(cnt - 1, 1))  # unbiased in the buffer
    else:
        mu = running_mean.astype(xd.dtype)
        var = running_var.astype(xd.dtype)
    inv = (1.0 / np.sqrt(var + eps)).astype(xd.dtype).reshape(shape)
    xhat = (xd - mu.reshape(shape)) * inv
    out = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)
    if apply_relu:
        mask = out > 0
        out = np.where(mask, out, xd.dtype.type(0))
    else:
        mask = None

    def vjp(g):
        if mask is not None:
            g = g * mask
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(shape)
        if training:
            cnt = xd.shape[0] * xd.shape[2] * xd.shape[3]
            dx = inv / cnt * (cnt * dxhat
                              - dxhat.sum(axis=axes, keepdims=True)
                              - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
        else:
            dx = dxhat * inv
        return dx.astype(xd.dtype), dgamma, dbeta

    return _make(out, (x, gamma, beta), vjp)


def upsample2x(x) -> Tensor:
    """Fixed-weight bilinear 2x spatial upsample of (N,C,H,W)."""
    x = as_tensor(x)
    return _make(K.upsample2x(x.data), (x,), lambda g: (K.upsample2x_adj(g),))


def planes_sample(planes, xs, ys) -> Tensor:
    """Sample plane k of a (K,H,W) stack at point k; differentiable like plane_sample."""
    planes, xs, ys = as_tensor(planes), as_tensor(xs), as_tensor(ys)
    xd = xs.data.astype(planes.data.dtype)
    yd = ys.data.astype(planes.data.dtype)
    vals = K.planes_gather(planes.data, xd, yd)

    def vjp(g):
        gp = None
        if planes.requires_grad:
            gp = np.zeros_like(planes.data)
            K.planes_scatter_add(gp, xd, yd, g)
        gx = gy = None
        if xs.requires_grad or ys.requires_grad:
            gx, gy = K.planes_coord_grad(planes.data, xd, yd, g)
            gx = gx.astype(xs.data.dtype)
            gy = gy.astype(ys.data.dtype)
        return gp, gx, gy

    return _make(vals, (planes, xs, ys), vjp)


def plane_sample(plane, xs, ys) -> Tensor:
    """Differentiable bilinear sampling of a (H,W) plane at points (xs, ys).

    Gradients flow to the plane and to the coordinates; coordinates clamp to
    the image with zero gradient once clamped.
    """
    plane, xs, ys = as_tensor(plane), as_tensor(xs), as_tensor(ys)
    xd = np.atleast_1d(xs.data.astype(plane.data.dtype))
    yd = np.atleast_1d(ys.data.astype(plane.data.dtype))
    vals = K.plane_gather(plane.data, xd, yd)

    def vjp(g):
        g = np.atleast_1d(g)
        gp = None
        if plane.requires_grad:
            gp = np.zeros_like(plane.data)
            K.plane_scatter_add(gp, xd, yd, g)
        gx = gy = None
        if xs.requires_grad or ys.requires_grad:
            gx, gy = K.plane_coord_grad(plane.data, xd, yd, g)
            gx = gx.reshape(xs.data.shape).astype(xs.data.dtype)
            gy = gy.reshape(ys.data.shape).astype(ys.data.dtype)
        return gp, gx, gy

    return _make(vals, (plane, xs, ys), vjp)
