"""Dense tensors, reverse-mode autodiff, and multiply-accumulate accounting.

A Tensor wraps a float32 or float64 ndarray. Ops build a backward graph
when gradients are enabled (see no_grad); calling backward() on a scalar
fills .grad on every reachable tensor that requires it.

Every convolution / matmul op reports its scalar multiply-accumulate count
to the installed MacCounter. The convention: one MAC per kernel-formula
multiply (zero-padding positions included), bias adds and all elementwise,
normalization, and softmax work count zero. Counting covers the forward
pass only.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

from .backend import kernels

_INV_SQRT2 = float(1.0 / np.sqrt(2.0))
_INV_SQRT2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class KernelError(Exception):
    """Shape mismatch or a non-finite kernel output."""


# --------------------------------------------------------------------------
# MAC accounting
# --------------------------------------------------------------------------

class MacCounter:
    """Scalar multiply-accumulate tally, split by scope label."""

    def __init__(self):
        self.total = 0
        self.per_scope = {}

    def add(self, scope, n):
        n = int(n)
        if n < 0:
            raise ValueError("negative MAC increment")
        self.total += n
        self.per_scope[scope] = self.per_scope.get(scope, 0) + n

    def scoped_total(self, prefix):
        """Sum of every scope equal to `prefix` or nested under it."""
        sep = prefix + "/"
        return sum(v for k, v in self.per_scope.items()
                   if k == prefix or k.startswith(sep))


_local = threading.local()


def _stack():
    if not hasattr(_local, "scopes"):
        _local.scopes = []
        _local.counter = None
        _local.grad_enabled = True
    return _local.scopes


@contextmanager
def count_macs(counter):
    """Install `counter` as the active MacCounter for this thread."""
    _stack()
    prev = _local.counter
    _local.counter = counter
    try:
        yield counter
    finally:
        _local.counter = prev


@contextmanager
def mac_scope(label):
    stack = _stack()
    stack.append(label)
    try:
        yield
    finally:
        stack.pop()


def current_scope():
    return "/".join(_stack())


def add_macs(n):
    _stack()
    if _local.counter is not None:
        _local.counter.add(current_scope(), n)


# --------------------------------------------------------------------------
# Autodiff plumbing
# --------------------------------------------------------------------------

@contextmanager
def no_grad():
    """Disable graph recording (inference mode; frees activations eagerly)."""
    _stack()
    prev = _local.grad_enabled
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = prev


def grad_enabled():
    _stack()
    return _local.grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        data = np.asarray(data)
        if data.dtype == np.float32 or data.dtype == np.float64:
            self.data = data
        elif np.issubdtype(data.dtype, np.floating) or np.issubdtype(data.dtype, np.integer):
            self.data = data.astype(np.float64)
        else:
            raise KernelError(f"unsupported dtype {data.dtype}")
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # -- basic introspection ------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numel(self):
        return int(self.data.size)

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    # -- reverse pass ---------------------------------------------------------
    def backward(self):
        if self.data.shape != ():
            raise KernelError("backward() needs a scalar loss")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones((), dtype=self.data.dtype)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            if node is not self:
                node._parents = ()
                node._backward = None


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise KernelError(f"{op} produced non-finite values")
    return arr


def _make(data, parents, backward, op):
    _finite(data, op)
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(tensor, g):
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.array(g, dtype=tensor.data.dtype, copy=True)
    else:
        tensor.grad += g


def _unbroadcast(g, shape):
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# --------------------------------------------------------------------------
# Elementwise / structural ops (zero MACs)
# --------------------------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward, "add")


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward, "sub")


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data
    ad, bd = a.data, b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * bd, ad.shape))
        _accumulate(b, _unbroadcast(g * ad, bd.shape))

    return _make(data, (a, b), backward, "mul")


def scale(a, s):
    a = _as_tensor(a)
    s = float(s)
    data = a.data * np.asarray(s, dtype=a.data.dtype)

    def backward(g):
        _accumulate(a, g * s)

    return _make(data, (a,), backward, "scale")


def absolute(a):
    a = _as_tensor(a)
    sign = np.sign(a.data)

    def backward(g):
        _accumulate(a, g * sign)

    return _make(np.abs(a.data), (a,), backward, "abs")


def mean_all(a):
    a = _as_tensor(a)
    n = a.data.size
    data = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def backward(g):
        _accumulate(a, np.full(a.data.shape, g / n, dtype=a.data.dtype))

    return _make(data, (a,), backward, "mean")


def sum_all(a):
    a = _as_tensor(a)
    data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def backward(g):
        _accumulate(a, np.full(a.data.shape, g, dtype=a.data.dtype))

    return _make(data, (a,), backward, "sum")


def reshape(a, shape):
    a = _as_tensor(a)
    old = a.data.shape

    def backward(g):
        _accumulate(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward, "reshape")


def transpose(a, axes):
    a = _as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        _accumulate(a, g.transpose(inv))

    return _make(a.data.transpose(axes).copy(), (a,), backward, "transpose")


def concat(tensors, axis):
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)
    data = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _make(data, tuple(tensors), backward, "concat")


def narrow(a, axis, start, length):
    a = _as_tensor(a)
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def backward(g):
        if a.requires_grad:
            full = np.zeros(a.data.shape, dtype=g.dtype)
            full[idx] = g
            _accumulate(a, full)

    return _make(a.data[idx].copy(), (a,), backward, "narrow")


# --------------------------------------------------------------------------
# Activations and normalization (zero MACs)
# --------------------------------------------------------------------------

def sigmoid(a):
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        _accumulate(a, g * data * (1.0 - data))

    return _make(data, (a,), backward, "sigmoid")


def gelu(a):
    a = _as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    data = (x * cdf).astype(x.dtype)

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        _accumulate(a, g * (cdf + x * pdf))

    return _make(data, (a,), backward, "gelu")


def prelu(a, alpha):
    """PReLU with per-channel slope; alpha broadcasts against a."""
    a, alpha = _as_tensor(a), _as_tensor(alpha)
    pos = np.maximum(a.data, 0.0)
    neg = np.minimum(a.data, 0.0)
    data = pos + alpha.data * neg
    mask = (a.data > 0.0).astype(a.data.dtype)

    def backward(g):
        _accumulate(a, g * (mask + alpha.data * (1.0 - mask)))
        _accumulate(alpha, _unbroadcast(g * neg, alpha.data.shape))

    return _make(data, (a, alpha), backward, "prelu")


def glu(a, axis=1):
    """Gated linear unit: split channels in half, gate with sigmoid."""
    a = _as_tensor(a)
    c = a.data.shape[axis]
    if c % 2:
        raise KernelError("glu needs an even channel count")
    value = narrow(a, axis, 0, c // 2)
    gate = narrow(a, axis, c // 2, c // 2)
    return mul(value, sigmoid(gate))


def softmax(a, axis):
    a = _as_tensor(a)
    if a.data.shape[axis] == 0:
        raise KernelError("softmax over an empty axis")
    with np.errstate(invalid="ignore", over="ignore"):
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(a, data * (g - dot))

    return _make(data, (a,), backward, "softmax")


def layer_norm(a, gamma, beta, axis=1, eps=1e-5):
    """Normalize over `axis` (an int or tuple: zero mean, unit variance per
    remaining slice) then apply the affine parameters."""
    a, gamma, beta = _as_tensor(a), _as_tensor(gamma), _as_tensor(beta)
    axis = (axis,) if isinstance(axis, int) else tuple(axis)
    x = a.data
    with np.errstate(over="ignore", invalid="ignore"):
        mu = x.mean(axis=axis, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=axis, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv
    data = gamma.data * xhat + beta.data

    def backward(g):
        ghat = g * gamma.data
        term = ghat - ghat.mean(axis=axis, keepdims=True) \
            - xhat * (ghat * xhat).mean(axis=axis, keepdims=True)
        _accumulate(a, inv * term)
        _accumulate(gamma, _unbroadcast(g * xhat, gamma.data.shape))
        _accumulate(beta, _unbroadcast(g, beta.data.shape))

    return _make(data, (a, gamma, beta), backward, "layer_norm")


def dropout(a, rate, rng=None, training=False):
    """Inverted dropout; identity when not training or rate == 0."""
    a = _as_tensor(a)
    if not training or rate <= 0.0:
        return a
    if rng is None:
        raise KernelError("training-mode dropout needs an rng")
    keep = 1.0 - rate
    mask = (rng.random(a.data.shape) < keep).astype(a.data.dtype) / keep
    return mul(a, Tensor(mask))


# --------------------------------------------------------------------------
# Counted ops: convolutions, transposed convolutions, matmul
# --------------------------------------------------------------------------

def _bias_add(data, bias):
    if bias is None:
        return data, None
    b = _as_tensor(bias)
    extra = (1,) * (data.ndim - 2)
    return data + b.data.reshape((1, -1) + extra), b


def conv1d(x, w, bias=None, dilation=1, pad=0):
    """Stride-1 1D convolution: (B,Ci,L) x (Co,Ci,K) -> (B,Co,Lout).

    Counts Ci*Co*K*Lout MACs per batch item, padding positions included;
    the bias add is not counted.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 3 or w.data.ndim != 3 or x.data.shape[1] != w.data.shape[1]:
        raise KernelError(f"conv1d shape mismatch: x{x.data.shape} w{w.data.shape}")
    b, ci, length = x.data.shape
    co, _, kernel = w.data.shape
    lout = length + 2 * pad - dilation * (kernel - 1)
    if lout <= 0:
        raise KernelError("conv1d: kernel span exceeds padded input")
    add_macs(b * ci * co * kernel * lout)
    data, bt = _bias_add(kernels.conv1d_fwd(x.data, w.data, dilation, pad), bias)
    xd, wd = x.data, w.data

    def backward(g):
        if x.requires_grad:
            _accumulate(x, kernels.conv1d_gx(g, wd, dilation, pad, length))
        if w.requires_grad:
            _accumulate(w, kernels.conv1d_gw(xd, g, dilation, pad, kernel))
        if bt is not None and bt.requires_grad:
            _accumulate(bt, g.sum(axis=(0, 2)))

    parents = (x, w) if bt is None else (x, w, bt)
    return _make(data, parents, backward, "conv1d")


def conv2d(x, w, bias=None, pad=0):
    """Stride-1 2D convolution: (B,Ci,H,W) x (Co,Ci,Kh,Kw) -> (B,Co,Hout,Wout).

    Counts Ci*Co*Kh*Kw*Hout*Wout MACs per batch item.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4 or x.data.shape[1] != w.data.shape[1]:
        raise KernelError(f"conv2d shape mismatch: x{x.data.shape} w{w.data.shape}")
    b, ci, h, w_in = x.data.shape
    co, _, kh, kw = w.data.shape
    hout = h + 2 * pad - (kh - 1)
    wout = w_in + 2 * pad - (kw - 1)
    if hout <= 0 or wout <= 0:
        raise KernelError("conv2d: kernel span exceeds padded input")
    add_macs(b * ci * co * kh * kw * hout * wout)
    data, bt = _bias_add(kernels.conv2d_fwd(x.data, w.data, pad), bias)
    xd, wd = x.data, w.data

    def backward(g):
        if x.requires_grad:
            _accumulate(x, kernels.conv2d_gx(g, wd, pad, h, w_in))
        if w.requires_grad:
            _accumulate(w, kernels.conv2d_gw(xd, g, pad, kh, kw))
        if bt is not None and bt.requires_grad:
            _accumulate(bt, g.sum(axis=(0, 2, 3)))

    parents = (x, w) if bt is None else (x, w, bt)
    return _make(data, parents, backward, "conv2d")


def transposed_conv1d(x, w, bias=None):
    """Stride-1 transposed conv: (B,Ci,L) x (Ci,Co,K) -> (B,Co,L+K-1).

    Counts Ci*Co*K*L MACs per batch item (one per scatter-add multiply).
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 3 or w.data.ndim != 3 or x.data.shape[1] != w.data.shape[0]:
        raise KernelError(f"transposed_conv1d shape mismatch: x{x.data.shape} w{w.data.shape}")
    b, ci, length = x.data.shape
    _, co, kernel = w.data.shape
    add_macs(b * ci * co * kernel * length)
    data, bt = _bias_add(kernels.tconv1d_fwd(x.data, w.data), bias)
    xd, wd = x.data, w.data

    def backward(g):
        if x.requires_grad:
            _accumulate(x, kernels.tconv1d_gx(g, wd, length))
        if w.requires_grad:
            _accumulate(w, kernels.tconv1d_gw(xd, g, kernel))
        if bt is not None and bt.requires_grad:
            _accumulate(bt, g.sum(axis=(0, 2)))

    parents = (x, w) if bt is None else (x, w, bt)
    return _make(data, parents, backward, "transposed_conv1d")


def transposed_conv2d(x, w, bias=None):
    """Stride-1 transposed 2D conv cropped to the input's spatial size.

    (B,Ci,H,W) x (Ci,Co,Kh,Kw) -> (B,Co,H,W) for odd kernels.
    Counts Ci*Co*Kh*Kw*H*W MACs per batch item.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4 or x.data.shape[1] != w.data.shape[0]:
        raise KernelError(f"transposed_conv2d shape mismatch: x{x.data.shape} w{w.data.shape}")
    b, ci, h, w_in = x.data.shape
    _, co, kh, kw = w.data.shape
    add_macs(b * ci * co * kh * kw * h * w_in)
    data, bt = _bias_add(kernels.tconv2d_fwd(x.data, w.data), bias)
    xd, wd = x.data, w.data

    def backward(g):
        if x.requires_grad:
            _accumulate(x, kernels.tconv2d_gx(g, wd, h, w_in))
        if w.requires_grad:
            _accumulate(w, kernels.tconv2d_gw(xd, g, kh, kw))
        if bt is not None and bt.requires_grad:
            _accumulate(bt, g.sum(axis=(0, 2, 3)))

    parents = (x, w) if bt is None else (x, w, bt)
    return _make(data, parents, backward, "transposed_conv2d")


def depthwise_conv1d(x, w, bias=None, dilation=1, pad=0):
    """Per-channel stride-1 1D convolution: (B,C,L) x (C,K) -> (B,C,Lout).

    Counts C*K*Lout MACs per batch item.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 3 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise KernelError(f"depthwise_conv1d shape mismatch: x{x.data.shape} w{w.data.shape}")
    b, c, length = x.data.shape
    kernel = w.data.shape[1]
    lout = length + 2 * pad - dilation * (kernel - 1)
    if lout <= 0:
        raise KernelError("depthwise_conv1d: kernel span exceeds padded input")
    add_macs(b * c * kernel * lout)
    data, bt = _bias_add(kernels.dwconv1d_fwd(x.data, w.data, dilation, pad), bias)
    xd, wd = x.data, w.data

    def backward(g):
        if x.requires_grad:
            _accumulate(x, kernels.dwconv1d_gx(g, wd, dilation, pad, length))
        if w.requires_grad:
            _accumulate(w, kernels.dwconv1d_gw(xd, g, dilation, pad, kernel))
        if bt is not None and bt.requires_grad:
            _accumulate(bt, g.sum(axis=(0, 2)))

    parents = (x, w) if bt is None else (x, w, bt)
    return _make(data, parents, backward, "depthwise_conv1d")


def matmul(a, b):
    """2D or batched 3D matrix product; counts one MAC per scalar multiply."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != b.data.ndim or a.data.ndim not in (2, 3):
        raise KernelError(f"matmul needs matching 2D or 3D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise KernelError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    if a.data.ndim == 3 and a.data.shape[0] != b.data.shape[0]:
        raise KernelError("matmul batch dims differ")
    batch = a.data.shape[0] if a.data.ndim == 3 else 1
    m, k = a.data.shape[-2], a.data.shape[-1]
    n = b.data.shape[-1]
    add_macs(batch * m * k * n)
    data = np.matmul(a.data, b.data)
    ad, bd = a.data, b.data

    def backward(g):
        if a.requires_grad:
            _accumulate(a, np.matmul(g, bd.swapaxes(-1, -2)))
        if b.requires_grad:
            _accumulate(b, np.matmul(ad.swapaxes(-1, -2), g))

    return _make(data, (a, b), backward, "matmul")


# --------------------------------------------------------------------------
# Sequence restructuring (pure copies, zero MACs)
# --------------------------------------------------------------------------

def unfold1d(x, kernel, stride=1):
    """Stack `kernel` shifted copies of each channel: (B,D,L) -> (B,kernel*D,L-kernel+1).

    Output channel d*kernel+g holds input channel d shifted by g, matching a
    per-channel patch extraction along the last axis.
    """
    if stride != 1:
        raise KernelError("unfold1d supports stride 1 only")
    x = _as_tensor(x)
    b, d, length = x.data.shape
    if length < kernel:
        raise KernelError(f"unfold1d: length {length} < kernel {kernel}")
    lout = length - kernel + 1
    data = np.empty((b, kernel * d, lout), dtype=x.data.dtype)
    for g in range(kernel):
        data[:, g::kernel, :] = x.data[:, :, g:g + lout]

    def backward(grad):
        if x.requires_grad:
            gx = np.zeros((b, d, length), dtype=grad.dtype)
            for g in range(kernel):
                gx[:, :, g:g + lout] += grad[:, g::kernel, :]
            _accumulate(x, gx)

    return _make(data, (x,), backward, "unfold1d")


def channel_shuffle(x, groups):
    """Regroup unfolded channels so each contiguous slab is one shift subgroup.

    With input layout d*groups+g (from unfold1d), output channel g*D+d picks
    input channel d*groups+g; an inverse shuffle restores the input exactly.
    """
    x = _as_tensor(x)
    c = x.data.shape[1]
    if c % groups:
        raise KernelError(f"channel count {c} not divisible by {groups} groups")
    perm = shuffle_permutation(c, groups)
    inv = np.argsort(perm)
    data = x.data[:, perm, :].copy()

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g[:, inv, :])

    return _make(data, (x,), backward, "channel_shuffle")


def shuffle_permutation(channels, groups):
    """Gather indices: output channel c reads input channel (c % D)*G + c // D."""
    d = channels // groups
    c = np.arange(channels)
    return (c % d) * groups + c // d


def channel_unshuffle(x, groups):
    """Inverse of channel_shuffle for the same group count."""
    x = _as_tensor(x)
    c = x.data.shape[1]
    if c % groups:
        raise KernelError(f"channel count {c} not divisible by {groups} groups")
    perm = np.argsort(shuffle_permutation(c, groups))
    inv = np.argsort(perm)
    data = x.data[:, perm, :].copy()

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g[:, inv, :])

    return _make(data, (x,), backward, "channel_unshuffle")
