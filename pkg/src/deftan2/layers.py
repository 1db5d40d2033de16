"""Weight-bearing layers built on the tensor ops.

Each layer owns its parameters as Tensors (requires_grad=True) and exposes
`params()` as (name, tensor) pairs in a deterministic order, which fixes
both the init stream consumption and the save/load manifest order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class LayerWeights:
    """Kernel + optional bias with the metadata needed for cost accounting."""

    kernel: Tensor
    bias: Tensor | None
    in_channels: int
    out_channels: int
    kernel_size: tuple
    dilation: int = 1
    stride: int = 1
    transposed: bool = False

    def weight_count(self):
        return self.kernel.numel()

    def bias_count(self):
        return 0 if self.bias is None else self.bias.numel()


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


class Layer:
    def params(self):
        raise NotImplementedError

    def set_training(self, training):
        pass


class _ConvBase(Layer):
    def __init__(self, rng, cin, cout, ksize, dtype, dilation=1, bias=True, transposed=False):
        kshape = (cout, cin) + ksize if not transposed else (cin, cout) + ksize
        fan_in = cin * int(np.prod(ksize))
        kernel = _uniform(rng, kshape, fan_in, dtype)
        b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True) if bias else None
        self.w = LayerWeights(kernel, b, cin, cout, ksize, dilation=dilation,
                              transposed=transposed)

    def params(self):
        out = [("kernel", self.w.kernel)]
        if self.w.bias is not None:
            out.append(("bias", self.w.bias))
        return out


class Conv1d(_ConvBase):
    """Same-padded stride-1 1D convolution (odd kernel)."""

    def __init__(self, rng, cin, cout, kernel, dtype, dilation=1, bias=True):
        if kernel % 2 == 0:
            raise ValueError("conv kernels must be odd for same padding")
        super().__init__(rng, cin, cout, (kernel,), dtype, dilation=dilation, bias=bias)
        self.pad = dilation * (kernel - 1) // 2

    def __call__(self, x):
        return T.conv1d(x, self.w.kernel, self.w.bias,
                        dilation=self.w.dilation, pad=self.pad)


class Conv2dSeq(_ConvBase):
    """(k x k) conv applied along a sequence viewed as a height-1 map.

    Functionally a k-tap 1D conv (the off-center kernel rows only ever see
    zero padding) but it carries and counts the full k*k taps per channel
    pair. Used where the attention derives queries/keys.
    """

    def __init__(self, rng, cin, cout, kernel, dtype, bias=True):
        if kernel % 2 == 0:
            raise ValueError("conv kernels must be odd for same padding")
        super().__init__(rng, cin, cout, (kernel, kernel), dtype, bias=bias)
        self.pad = (kernel - 1) // 2

    def __call__(self, x):
        b, c, length = x.shape
        y = T.conv2d(T.reshape(x, (b, c, 1, length)), self.w.kernel, self.w.bias,
                     pad=self.pad)
        return T.reshape(y, (b, self.w.out_channels, length))


class Conv2d(_ConvBase):
    """Same-padded stride-1 2D convolution (odd square kernel)."""

    def __init__(self, rng, cin, cout, kernel, dtype, bias=True):
        if kernel % 2 == 0:
            raise ValueError("conv kernels must be odd for same padding")
        super().__init__(rng, cin, cout, (kernel, kernel), dtype, bias=bias)
        self.pad = (kernel - 1) // 2

    def __call__(self, x):
        return T.conv2d(x, self.w.kernel, self.w.bias, pad=self.pad)


class DepthwiseConv1d(Layer):
    """Same-padded per-channel 1D convolution."""

    def __init__(self, rng, channels, kernel, dtype, dilation=1, bias=True):
        if kernel % 2 == 0:
            raise ValueError("conv kernels must be odd for same padding")
        kernel_t = _uniform(rng, (channels, kernel), kernel, dtype)
        b = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True) if bias else None
        self.w = LayerWeights(kernel_t, b, channels, channels, (kernel,),
                              dilation=dilation)
        self.pad = dilation * (kernel - 1) // 2

    def __call__(self, x):
        return T.depthwise_conv1d(x, self.w.kernel, self.w.bias,
                                  dilation=self.w.dilation, pad=self.pad)

    def params(self):
        out = [("kernel", self.w.kernel)]
        if self.w.bias is not None:
            out.append(("bias", self.w.bias))
        return out


class TConv1d(_ConvBase):
    """Stride-1 transposed 1D conv; lengthens the sequence by kernel-1."""

    def __init__(self, rng, cin, cout, kernel, dtype, bias=True):
        super().__init__(rng, cin, cout, (kernel,), dtype, bias=bias, transposed=True)

    def __call__(self, x):
        return T.transposed_conv1d(x, self.w.kernel, self.w.bias)


class TConv2d(_ConvBase):
    """Stride-1 transposed 2D conv cropped back to the input spatial size."""

    def __init__(self, rng, cin, cout, kernel, dtype, bias=True):
        if kernel % 2 == 0:
            raise ValueError("transposed 2D kernels must be odd to crop symmetrically")
        super().__init__(rng, cin, cout, (kernel, kernel), dtype, bias=bias, transposed=True)

    def __call__(self, x):
        return T.transposed_conv2d(x, self.w.kernel, self.w.bias)


class LayerNorm(Layer):
    """Normalization with per-channel affine parameters.

    scope="map" normalizes each batch item over channels and every spatial
    axis jointly (healthy statistics even for 2-channel features);
    scope="channel" normalizes over channels per spatial position.
    """

    def __init__(self, channels, dtype, eps=1e-5, scope="map"):
        if scope not in ("map", "channel"):
            raise ValueError(f"unknown LayerNorm scope {scope!r}")
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.eps = eps
        self.channels = channels
        self.scope = scope

    def __call__(self, x):
        tail = (1,) * (len(x.shape) - 2)
        g = T.reshape(self.gamma, (1, self.channels) + tail)
        b = T.reshape(self.beta, (1, self.channels) + tail)
        axis = 1 if self.scope == "channel" else tuple(range(1, len(x.shape)))
        return T.layer_norm(x, g, b, axis=axis, eps=self.eps)

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


class PReLU(Layer):
    def __init__(self, channels, dtype, init=0.25):
        self.alpha = Tensor(np.full(channels, init, dtype=dtype), requires_grad=True)
        self.channels = channels

    def __call__(self, x):
        tail = (1,) * (len(x.shape) - 2)
        a = T.reshape(self.alpha, (1, self.channels) + tail)
        return T.prelu(x, a)

    def params(self):
        return [("alpha", self.alpha)]


class Composite(Layer):
    """A layer made of named children; parameter names carry the path."""

    def __init__(self):
        self._children = []

    def add(self, name, child):
        self._children.append((name, child))
        return child

    def named_children(self):
        return list(self._children)

    def params(self):
        out = []
        for name, child in self._children:
            out.extend((f"{name}.{pname}", p) for pname, p in child.params())
        return out

    def set_training(self, training):
        for _, child in self._children:
            child.set_training(training)

    def layer_weights(self):
        """Every LayerWeights in this subtree, with path names."""
        out = []
        for name, child in self._children:
            if isinstance(child, Composite):
                out.extend((f"{name}.{sub}", w) for sub, w in child.layer_weights())
            elif hasattr(child, "w") and isinstance(child.w, LayerWeights):
                out.append((name, child.w))
        return out
