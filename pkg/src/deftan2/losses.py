"""Training loss on RI spectrogram magnitudes and the SI-SDR metric.

The magnitude loss averages | (|S_re|-|E_re|) + (|S_im|-|E_im|) | over all
bins: the outer absolute wraps the *sum* of the two plane differences, so
opposite-sign errors can cancel. mode="split" takes the absolute of each
plane difference instead; the default keeps the summed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T

SI_SDR_CAP_DB = 300.0
LOSS_MODES = ("verbatim", "split")


@dataclass
class LossBreakdown:
    total: T.Tensor
    speech_term: T.Tensor
    noise_term: T.Tensor

    def values(self):
        return (self.total.item(), self.speech_term.item(), self.noise_term.item())


def stft_mag_loss(target, estimate, mode="verbatim"):
    """Mean RI-magnitude discrepancy between (2, T, F) spectrogram pairs."""
    if mode not in LOSS_MODES:
        raise ValueError(f"unknown loss mode {mode!r}")
    target, estimate = T._as_tensor(target), T._as_tensor(estimate)
    if target.shape != estimate.shape or target.shape[0] != 2:
        raise T.KernelError(
            f"loss shapes must match as (2, T, F): {target.shape} vs {estimate.shape}")
    diff_re = T.sub(T.absolute(T.narrow(target, 0, 0, 1)),
                    T.absolute(T.narrow(estimate, 0, 0, 1)))
    diff_im = T.sub(T.absolute(T.narrow(target, 0, 1, 1)),
                    T.absolute(T.narrow(estimate, 0, 1, 1)))
    if mode == "verbatim":
        return T.mean_all(T.absolute(T.add(diff_re, diff_im)))
    return T.mean_all(T.add(T.absolute(diff_re), T.absolute(diff_im)))


def pcm_loss(speech, estimate, mixture_ref, mode="verbatim"):
    """Half the magnitude loss on speech plus half on residual noise.

    The noise pair is formed against the reference-channel mixture:
    noise = mixture - speech, estimated noise = mixture - estimate.
    """
    speech = T._as_tensor(speech)
    estimate = T._as_tensor(estimate)
    mixture_ref = T._as_tensor(mixture_ref)
    noise = T.sub(mixture_ref, speech)
    noise_est = T.sub(mixture_ref, estimate)
    speech_term = stft_mag_loss(speech, estimate, mode)
    noise_term = stft_mag_loss(noise, noise_est, mode)
    total = T.scale(T.add(speech_term, noise_term), 0.5)
    return LossBreakdown(total, speech_term, noise_term)


def si_sdr(estimate, reference):
    """Scale-invariant signal-to-distortion ratio in dB.

    Both signals are zero-meaned, the estimate is projected onto the
    reference, and the ratio of projection to residual power is returned.
    A perfect match reports the +300 dB cap instead of infinity.
    """
    est = np.asarray(estimate, dtype=np.float64).ravel()
    ref = np.asarray(reference, dtype=np.float64).ravel()
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    ref = ref - ref.mean()
    est = est - est.mean()
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference signal is zero; SI-SDR undefined")
    proj = (float(np.dot(est, ref)) / ref_energy) * ref
    noise = est - proj
    p_proj = float(np.dot(proj, proj))
    p_noise = float(np.dot(noise, noise))
    if p_noise == 0.0 or p_proj / p_noise > 10.0 ** (SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return 10.0 * np.log10(p_proj / p_noise)
