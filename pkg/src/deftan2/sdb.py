"""Split dense blocks plus the dense / grouped-dense baselines.

A split dense block divides its input channels into G subgroups of D,
runs the first subgroup through a D->D conv, then folds each remaining
subgroup in with a 2D->D conv over the concatenation with the running
feature. Output stays at D channels. The 1D form first unfolds the
sequence into G shifted copies and channel-shuffles them into subgroups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import Composite, Conv1d, Conv2d, LayerNorm, PReLU


@dataclass
class SdbConfig:
    groups: int
    channels: int
    kernel: int

    def __post_init__(self):
        if self.channels % self.groups:
            raise ValueError(
                f"channels {self.channels} not divisible by groups {self.groups}")
        if self.kernel % 2 == 0:
            raise ValueError("sdb kernel must be odd")

    @property
    def sub(self):
        return self.channels // self.groups


class _SdbStages(Composite):
    """The shared conv ladder: one D->D stage then G-1 2D->D stages.

    SDB convolutions carry no bias (normalization directly follows).
    When final_activation is False the last conv stays linear so signed
    outputs pass through; earlier stages always end in LN + PReLU.
    """

    def __init__(self, rng, cfg, dtype, conv_cls, final_activation=True):
        super().__init__()
        self.cfg = cfg
        self.final_activation = final_activation
        d = cfg.sub
        self.convs = []
        self.norms = []
        self.acts = []
        for g in range(cfg.groups):
            cin = d if g == 0 else 2 * d
            conv = self.add(f"conv{g}", conv_cls(rng, cin, d, cfg.kernel, dtype, bias=False))
            self.convs.append(conv)
            last = g == cfg.groups - 1
            if final_activation or not last:
                self.norms.append(self.add(f"norm{g}", LayerNorm(d, dtype)))
                self.acts.append(self.add(f"act{g}", PReLU(d, dtype)))
            else:
                self.norms.append(None)
                self.acts.append(None)

    def run(self, x):
        cfg = self.cfg
        d = cfg.sub
        feat = None
        for g in range(cfg.groups):
            group = T.narrow(x, 1, g * d, d)
            inp = group if g == 0 else T.concat([feat, group], axis=1)
            feat = self.convs[g](inp)
            if self.norms[g] is not None:
                feat = self.acts[g](self.norms[g](feat))
        return feat


class SplitDenseBlock2d(_SdbStages):
    """(B, C, T, F) -> (B, D, T, F) with same-padded k x k convs."""

    def __init__(self, rng, cfg, dtype, final_activation=True):
        super().__init__(rng, cfg, dtype, Conv2d, final_activation)

    def __call__(self, x):
        if x.shape[1] != self.cfg.channels:
            raise T.KernelError(
                f"sdb2d expects {self.cfg.channels} channels, got {x.shape[1]}")
        return self.run(x)


class SplitDenseBlock1d(_SdbStages):
    """(B, D, L) -> (B, D, L-G+1): unfold, shuffle, then the conv ladder.

    cfg.channels is the unfolded budget G*D; the same-padded k-tap convs
    keep the shortened length L-G+1.
    """

    def __init__(self, rng, cfg, dtype, final_activation=True):
        super().__init__(rng, cfg, dtype, Conv1d, final_activation)

    def __call__(self, x):
        cfg = self.cfg
        if x.shape[1] != cfg.sub:
            raise T.KernelError(f"sdb1d expects {cfg.sub} channels, got {x.shape[1]}")
        if x.shape[2] < cfg.groups:
            raise T.KernelError(
                f"sdb1d needs length >= {cfg.groups}, got {x.shape[2]}")
        u = T.unfold1d(x, cfg.groups)
        return self.run(T.channel_shuffle(u, cfg.groups))


class DenseBlock(Composite):
    """Baseline: layer g consumes the concat of the input and all previous
    outputs (g*C channels) and emits C; G layers of same-padded convs.

    conv_cls picks the 2D (k x k) or 1D (k-tap) form; channels are
    preserved end to end.
    """

    def __init__(self, rng, cfg, dtype, conv_cls=Conv2d):
        super().__init__()
        self.cfg = cfg
        c = cfg.channels
        self.convs = [
            self.add(f"conv{g}", conv_cls(rng, (g + 1) * c, c, cfg.kernel, dtype, bias=False))
            for g in range(cfg.groups)
        ]
        self.norms = [self.add(f"norm{g}", LayerNorm(c, dtype)) for g in range(cfg.groups)]
        self.acts = [self.add(f"act{g}", PReLU(c, dtype)) for g in range(cfg.groups)]

    def __call__(self, x):
        feats = [x]
        out = x
        for g in range(self.cfg.groups):
            inp = feats[0] if g == 0 else T.concat(feats, axis=1)
            out = self.acts[g](self.norms[g](self.convs[g](inp)))
            feats.append(out)
        return out


class GroupedDenseBlock(Composite):
    """Dense baseline with G-way group convolutions at every layer."""

    def __init__(self, rng, cfg, dtype, conv_cls=Conv2d):
        super().__init__()
        self.cfg = cfg
        c, groups = cfg.channels, cfg.groups
        self.convs = []
        for g in range(groups):
            cin_grp = (g + 1) * c // groups
            stage = [
                self.add(f"conv{g}_{j}",
                         conv_cls(rng, cin_grp, c // groups, cfg.kernel, dtype, bias=False))
                for j in range(groups)
            ]
            self.convs.append(stage)
        self.norms = [self.add(f"norm{g}", LayerNorm(c, dtype)) for g in range(groups)]
        self.acts = [self.add(f"act{g}", PReLU(c, dtype)) for g in range(groups)]

    def __call__(self, x):
        cfg = self.cfg
        groups = cfg.groups
        feats = [x]
        out = x
        for g in range(groups):
            inp = feats[0] if g == 0 else T.concat(feats, axis=1)
            cin_grp = inp.shape[1] // groups
            pieces = [
                self.convs[g][j](T.narrow(inp, 1, j * cin_grp, cin_grp))
                for j in range(groups)
            ]
            out = self.acts[g](self.norms[g](T.concat(pieces, axis=1)))
            feats.append(out)
        return out
