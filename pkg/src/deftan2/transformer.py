"""Frequency- and time-axis sequence transformers.

Both run the same sub-block on (batch, D, L) sequences: a 1D split dense
block (unfold + shuffle + conv ladder), an attention variant, a
feedforward variant, and a stride-1 transposed conv that restores the
length shortened by the unfold, followed by a residual add of the
transformer input. The frequency form folds time into the batch; the time
form folds frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import tensor as T
from .attention import AttnConfig, Attention
from .feedforward import FfwConfig, Feedforward
from .layers import Composite, Conv1d, TConv1d
from .sdb import DenseBlock, GroupedDenseBlock, SdbConfig, SplitDenseBlock1d
from .tensor import mac_scope

BLOCK_1D_KINDS = ("sdb", "dense", "grouped", "none")


@dataclass
class SequenceBlockConfig:
    channels: int            # D
    groups: int              # G (also the unfold kernel for the sdb path)
    kernel: int              # k for the dense/sdb convs
    heads: int
    ffw_kernel: int          # l
    dilation: int            # per-block dilation for the feedforward conv
    attention: str = "cea"
    feedforward: str = "dpfn"
    block_1d: str = "sdb"
    qk_conv: str = "kxk"
    dropout_attn: float = 0.0
    dropout_out: float = 0.0
    dropout_ffw1: float = 0.0
    dropout_ffw2: float = 0.0

    def __post_init__(self):
        if self.block_1d not in BLOCK_1D_KINDS:
            raise ValueError(f"unknown 1D block kind {self.block_1d!r}")


class SequenceTransformer(Composite):
    """One transformer pass over (B, D, L) sequences."""

    def __init__(self, rng, cfg, dtype):
        super().__init__()
        self.cfg = cfg
        d, g = cfg.channels, cfg.groups
        if cfg.block_1d == "sdb":
            self.front = self.add("sdb", SplitDenseBlock1d(
                rng, SdbConfig(g, g * d, cfg.kernel), dtype))
            self.restore = self.add("deconv", TConv1d(rng, d, d, g, dtype))
        elif cfg.block_1d == "dense":
            self.front = self.add("dense", DenseBlock(
                rng, SdbConfig(g, d, cfg.kernel), dtype, conv_cls=Conv1d))
            self.restore = None
        elif cfg.block_1d == "grouped":
            self.front = self.add("grouped", GroupedDenseBlock(
                rng, SdbConfig(g, d, cfg.kernel), dtype, conv_cls=Conv1d))
            self.restore = None
        else:
            self.front = None
            self.restore = None
        self.attn = self.add("attn", Attention(rng, AttnConfig(
            channels=d, heads=cfg.heads, kernel=cfg.kernel, variant=cfg.attention,
            qk_conv=cfg.qk_conv, dropout_attn=cfg.dropout_attn,
            dropout_out=cfg.dropout_out), dtype))
        self.ffw = self.add("ffw", Feedforward(rng, FfwConfig(
            channels=d, kernel=cfg.ffw_kernel, dilation=cfg.dilation,
            variant=cfg.feedforward, dropout_1=cfg.dropout_ffw1,
            dropout_2=cfg.dropout_ffw2, dropout_out=cfg.dropout_out), dtype))

    def set_training(self, training, rng=None):
        self.attn.set_training(training, rng)
        self.ffw.set_training(training, rng)

    def __call__(self, x):
        h = x
        if self.front is not None:
            scope = self.cfg.block_1d if self.cfg.block_1d != "sdb" else "sdb"
            with mac_scope(scope):
                h = self.front(h)
        with mac_scope("attn"):
            h = self.attn(h)
        with mac_scope("ffw"):
            h = self.ffw(h)
        if self.restore is not None:
            with mac_scope("deconv"):
                h = self.restore(h)
        return T.add(h, x)


def fold_time(x):
    """(B, D, T, F) -> (B*T, D, F): time slices become batch items."""
    b, d, t, f = x.shape
    return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b * t, d, f))


def unfold_time(x, b, t):
    bt, d, f = x.shape
    return T.transpose(T.reshape(x, (b, t, d, f)), (0, 2, 1, 3))


def fold_freq(x):
    """(B, D, T, F) -> (B*F, D, T): frequency slices become batch items."""
    b, d, t, f = x.shape
    return T.reshape(T.transpose(x, (0, 3, 1, 2)), (b * f, d, t))


def unfold_freq(x, b, f):
    bf, d, t = x.shape
    return T.transpose(T.reshape(x, (b, f, d, t)), (0, 2, 3, 1))


class FrequencyTransformer(Composite):
    """Runs the sequence block along frequency, time folded into batch."""

    def __init__(self, rng, cfg, dtype):
        super().__init__()
        self.inner = self.add("seq", SequenceTransformer(rng, cfg, dtype))

    def set_training(self, training, rng=None):
        self.inner.set_training(training, rng)

    def __call__(self, x):
        b, _, t, _ = x.shape
        return unfold_time(self.inner(fold_time(x)), b, t)


class TimeTransformer(Composite):
    """Runs the sequence block along time, frequency folded into batch."""

    def __init__(self, rng, cfg, dtype):
        super().__init__()
        self.inner = self.add("seq", SequenceTransformer(rng, cfg, dtype))

    def set_training(self, training, rng=None):
        self.inner.set_training(training, rng)

    def __call__(self, x):
        b, _, _, f = x.shape
        return unfold_freq(self.inner(fold_freq(x)), b, f)
