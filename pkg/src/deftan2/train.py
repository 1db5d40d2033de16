"""Toy training: plain gradient descent overfitting one fixed mixture.

The tape differentiates from the spectrogram-domain loss back through the
decoder, blocks, and encoder; the input spectrogram itself is a constant,
so no transform gradients are needed. Intended for small configs and
gradient-checked correctness work, not production training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses, network as net, spectral as stft_mod, tensor as T
from .tensor import Tensor


class TrainingError(Exception):
    pass


@dataclass
class TrainResult:
    losses: list
    initial_loss: float
    final_loss: float


def spectrogram_targets(config, mixture, clean_ref):
    """Constant tensors for the loss: input planes, clean target, mixture ref.

    All three share the mixture's variance normalization so the network
    output and targets live on one scale.
    """
    normed, scale = stft_mod.normalize_variance(mixture)
    spec_in = stft_mod.stft(normed, config.win, config.hop)
    x = Tensor(spec_in.ri[None].astype(config.np_dtype))

    clean = np.asarray(clean_ref, dtype=np.float64) * scale
    spec_clean = stft_mod.stft(
        type(mixture)(clean, mixture.sample_rate), config.win, config.hop)
    target = np.stack([spec_clean.ri[0], spec_clean.ri[1]])
    s_t = Tensor(target.astype(config.np_dtype))

    mics = config.mics
    y_ref = np.stack([spec_in.ri[0], spec_in.ri[mics]])
    y_t = Tensor(y_ref.astype(config.np_dtype))
    return x, s_t, y_t, scale, spec_in


def sgd_step(params, lr):
    for _, p in params:
        if p.grad is not None:
            p.data = p.data - lr * p.grad
            p.grad = None


def train_overfit(model, mixture, clean_ref, steps, lr, loss_mode="verbatim",
                  log=None):
    """Run `steps` gradient-descent steps on one clip; returns the loss trace."""
    config = model.config
    x, s_t, y_t, _, _ = spectrogram_targets(config, mixture, clean_ref)
    params = model.params()
    trace = []
    initial = None
    for step in range(steps + 1):
        out = model.forward_spect(x)
        est = T.reshape(out, out.shape[1:])
        breakdown = losses.pcm_loss(s_t, est, y_t, mode=loss_mode)
        value = breakdown.total.item()
        if not np.isfinite(value):
            raise TrainingError(f"non-finite loss at step {step}")
        trace.append(value)
        if initial is None:
            initial = value
        if log is not None:
            log(step, value)
        if step == steps:
            break
        breakdown.total.backward()
        sgd_step(params, lr)
    return TrainResult(trace, initial, trace[-1])
