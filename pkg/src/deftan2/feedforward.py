"""Feedforward variants with a fixed 4x channel expansion.

The dual-path form splits the expansion into a plain gated half and a half
refined by a dilated convolution; the baselines either skip convolution
entirely, run it depthwise over all expanded channels, or run it densely
over all expanded channels. Every variant ends in a projection back to D
channels plus a residual connection.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import tensor as T
from .layers import Composite, Conv1d, DepthwiseConv1d, LayerNorm, PReLU

FFW_VARIANTS = ("ffw", "dcfn", "dpfn", "cfn")
EXPANSION = 4


@dataclass
class FfwConfig:
    channels: int          # D
    kernel: int = 5        # l
    dilation: int = 1
    variant: str = "dpfn"
    dropout_1: float = 0.0
    dropout_2: float = 0.0
    dropout_out: float = 0.0

    def __post_init__(self):
        if self.kernel % 2 == 0:
            raise ValueError("ffw conv kernel must be odd")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        if self.variant not in FFW_VARIANTS:
            raise ValueError(f"unknown feedforward variant {self.variant!r}")


class Feedforward(Composite):
    def __init__(self, rng, cfg, dtype):
        super().__init__()
        self.cfg = cfg
        self.training = False
        self.rng = None
        d = cfg.channels
        wide = EXPANSION * d
        if cfg.variant == "dpfn":
            self.proj_1 = self.add("proj_1", Conv1d(rng, d, wide // 2, 1, dtype))
            self.proj_2 = self.add("proj_2", Conv1d(rng, d, wide // 2, 1, dtype))
            self.conv = self.add("conv", Conv1d(rng, wide // 2, wide // 2, cfg.kernel,
                                                dtype, dilation=cfg.dilation, bias=False))
            self.norm = self.add("norm", LayerNorm(wide // 2, dtype))
            self.act = self.add("act", PReLU(wide // 2, dtype))
        else:
            self.proj_in = self.add("proj_in", Conv1d(rng, d, wide, 1, dtype))
            if cfg.variant == "dcfn":
                self.conv = self.add("conv", DepthwiseConv1d(rng, wide, cfg.kernel,
                                                             dtype, dilation=cfg.dilation))
            elif cfg.variant == "cfn":
                self.conv = self.add("conv", Conv1d(rng, wide, wide, cfg.kernel,
                                                    dtype, dilation=cfg.dilation))
            else:
                self.conv = None
        self.proj_out = self.add("proj_out", Conv1d(rng, wide, d, 1, dtype))

    def set_training(self, training, rng=None):
        self.training = training
        self.rng = rng

    def _drop(self, x, rate):
        return T.dropout(x, rate, self.rng, self.training)

    def __call__(self, x):
        cfg = self.cfg
        if cfg.variant == "dpfn":
            first = self._drop(T.gelu(self.proj_1(x)), cfg.dropout_1)
            second = self._drop(T.gelu(self.proj_2(x)), cfg.dropout_2)
            second = self.act(self.norm(self.conv(second)))
            wide = T.concat([first, second], axis=1)
        else:
            wide = T.gelu(self.proj_in(x))
            if self.conv is not None:
                wide = self.conv(wide)
        out = self._drop(self.proj_out(wide), cfg.dropout_out)
        return T.add(out, x)
