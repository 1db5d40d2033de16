"""Multichannel speech enhancement with subgroup processing, plus an
analytic-vs-measured compute cost auditor.

The pipeline: variance-normalize, STFT, a conv encoder with a 2D split
dense block, stacked frequency/time sequence transformers (1D split dense
block, efficient attention with a gated conv branch, dual-path
feedforward), a conv decoder back to one RI spectrogram pair, inverse
STFT. Every convolution and matmul reports multiply-accumulates to a
scoped counter that the closed-form cost model must match exactly.
"""

from .audio import AudioClip, read_wav, write_wav
from .backend import backend_name
from .complexity import (analytic_cost, analyze, count_params, crossover_length,
                         macs_per_second, measure_block)
from .losses import LossBreakdown, pcm_loss, si_sdr, stft_mag_loss
from .network import Model, ModelConfig, build, enhance, load, save
from .spectral import Spectro, istft, mix, normalize_variance, stft
from .tensor import KernelError, MacCounter, Tensor, count_macs, mac_scope, no_grad
from .train import train_overfit

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "read_wav", "write_wav", "backend_name",
    "analytic_cost", "analyze", "count_params", "crossover_length",
    "macs_per_second", "measure_block",
    "LossBreakdown", "pcm_loss", "si_sdr", "stft_mag_loss",
    "Model", "ModelConfig", "build", "enhance", "load", "save",
    "Spectro", "istft", "mix", "normalize_variance", "stft",
    "KernelError", "MacCounter", "Tensor", "count_macs", "mac_scope", "no_grad",
    "train_overfit",
]
