"""Attention variants for the sequence transformers.

All three share pointwise query/key/value/output projections and a
residual connection. The efficient variants contract keys against values
first, giving a per-head (D/h x D/h) map instead of (L x L); queries are
softmax-normalized over the per-head channel axis and keys over the
sequence axis. The convolutional variant additionally derives queries and
keys from a shared gated conv branch.

MAC scopes: "core" covers the q/k/v projections, the shared conv branch,
and the attention matmuls; "out" covers the output projection. The core
scope is what the closed-form attention cost describes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import Composite, Conv1d, Conv2dSeq
from .tensor import mac_scope

ATTENTION_VARIANTS = ("vanilla", "ea", "cea")


@dataclass
class AttnConfig:
    channels: int          # D
    heads: int = 4
    kernel: int = 3        # conv kernel feeding queries/keys (cea only)
    variant: str = "cea"
    qk_conv: str = "kxk"   # "kxk": k*k taps viewed as a height-1 map; "1d": k taps
    dropout_attn: float = 0.0
    dropout_out: float = 0.0

    def __post_init__(self):
        if self.channels % self.heads:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.variant not in ATTENTION_VARIANTS:
            raise ValueError(f"unknown attention variant {self.variant!r}")
        if self.qk_conv not in ("kxk", "1d"):
            raise ValueError(f"unknown qk_conv mode {self.qk_conv!r}")


class Attention(Composite):
    def __init__(self, rng, cfg, dtype):
        super().__init__()
        self.cfg = cfg
        self.training = False
        self.rng = None
        d = cfg.channels
        if cfg.variant == "cea":
            conv_cls = Conv2dSeq if cfg.qk_conv == "kxk" else Conv1d
            self.shared_conv = self.add("shared_conv", conv_cls(rng, d, 2 * d, cfg.kernel, dtype))
        else:
            self.shared_conv = None
        self.proj_q = self.add("proj_q", Conv1d(rng, d, d, 1, dtype))
        self.proj_k = self.add("proj_k", Conv1d(rng, d, d, 1, dtype))
        self.proj_v = self.add("proj_v", Conv1d(rng, d, d, 1, dtype))
        self.proj_out = self.add("proj_out", Conv1d(rng, d, d, 1, dtype))

    def set_training(self, training, rng=None):
        self.training = training
        self.rng = rng

    def _split_heads(self, x):
        b, d, length = x.shape
        h = self.cfg.heads
        return T.reshape(x, (b * h, d // h, length))

    def _merge_heads(self, x, b):
        bh, dh, length = x.shape
        return T.reshape(x, (b, bh // b * dh, length))

    def _qkv(self, x):
        if self.cfg.variant == "cea":
            gated = T.glu(self.shared_conv(x), axis=1)
            q, k = self.proj_q(gated), self.proj_k(gated)
        else:
            q, k = self.proj_q(x), self.proj_k(x)
        return q, k, self.proj_v(x)

    def _efficient_maps(self, x, capture=None):
        """Per-head key-value contraction: (B*h, dh, dh), already scaled."""
        q, k, v = self._qkv(x)
        qh, kh, vh = self._split_heads(q), self._split_heads(k), self._split_heads(v)
        q_sm = T.softmax(qh, axis=1)         # over per-head channels
        k_sm = T.softmax(kh, axis=2)         # over sequence positions
        maps = T.matmul(k_sm, T.transpose(vh, (0, 2, 1)))
        maps = T.scale(maps, 1.0 / np.sqrt(self.cfg.channels))
        if capture is not None:
            capture["map"] = maps.data.copy()
        return q_sm, maps

    def __call__(self, x, capture=None):
        cfg = self.cfg
        b = x.shape[0]
        with mac_scope("core"):
            if cfg.variant == "vanilla":
                q, k, v = self._qkv(x)
                qh, kh, vh = self._split_heads(q), self._split_heads(k), self._split_heads(v)
                scores = T.matmul(T.transpose(qh, (0, 2, 1)), kh)   # (B*h, L, L)
                scores = T.scale(scores, 1.0 / np.sqrt(cfg.channels))
                weights = T.softmax(scores, axis=2)                 # over key positions
                if capture is not None:
                    capture["map"] = weights.data.copy()
                weights = T.dropout(weights, cfg.dropout_attn, self.rng, self.training)
                attended = T.matmul(vh, T.transpose(weights, (0, 2, 1)))
            else:
                q_sm, maps = self._efficient_maps(x, capture)
                maps = T.dropout(maps, cfg.dropout_attn, self.rng, self.training)
                attended = T.matmul(T.transpose(maps, (0, 2, 1)), q_sm)
            attended = self._merge_heads(attended, b)
        with mac_scope("out"):
            out = self.proj_out(attended)
        out = T.dropout(out, cfg.dropout_out, self.rng, self.training)
        return T.add(out, x)

    def export_map(self, x, head):
        """Dropout-free attention map of one head, as used by the forward pass.

        Efficient variants return the scaled (D/h x D/h) key-value map;
        vanilla returns the (L x L) softmax weights.
        """
        if not 0 <= head < self.cfg.heads:
            raise T.KernelError(f"head {head} out of range")
        with T.no_grad():
            if self.cfg.variant == "vanilla":
                capture = {}
                self(x, capture=capture)
                maps = capture["map"]
            else:
                _, maps = self._efficient_maps(x)
                maps = maps.data
        per_head = maps.reshape(x.shape[0], self.cfg.heads, maps.shape[1], maps.shape[2])
        return per_head[0, head]
