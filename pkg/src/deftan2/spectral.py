"""Waveform <-> complex spectrogram conversion, input scaling, and mixing.

Frames are fully interior (no implicit padding): T = (N - win)//hop + 1.
Analysis and synthesis use the same Hamming window; the inverse divides by
the window-square overlap sum, which reconstructs the analyzed span
exactly wherever that sum is non-negligible. All math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .backend import kernels

DEFAULT_WIN = 512
DEFAULT_HOP = 256
WINDOW_SUM_FLOOR = 1e-8


class StftError(Exception):
    pass


@dataclass
class Spectro:
    """ri: (2M, T, F) with the M real planes stacked before the M imaginary."""

    ri: np.ndarray
    win: int
    hop: int
    n_samples: int

    @property
    def mics(self):
        return self.ri.shape[0] // 2

    @property
    def frames(self):
        return self.ri.shape[1]

    @property
    def bins(self):
        return self.ri.shape[2]


def hamming(win):
    n = np.arange(win)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (win - 1))


def frame_count(n_samples, win=DEFAULT_WIN, hop=DEFAULT_HOP):
    if n_samples < win:
        raise StftError(f"need at least one window of {win} samples, got {n_samples}")
    return (n_samples - win) // hop + 1


def normalize_variance(clip):
    """Scale the clip to unit sample variance, jointly over all channels.

    Returns (scaled clip, scale); multiplying an output by 1/scale undoes
    the normalization. A single joint scale preserves inter-channel level
    cues.
    """
    std = float(np.std(clip.samples))
    if std == 0.0 or not np.isfinite(std):
        raise StftError("cannot normalize an all-zero or non-finite clip")
    scale = 1.0 / std
    return AudioClip(clip.samples * scale, clip.sample_rate), scale


def stft(clip, win=DEFAULT_WIN, hop=DEFAULT_HOP):
    """Single-sided spectrogram of every channel, RI planes channel-stacked."""
    x = np.asarray(clip.samples, dtype=np.float64)
    m, n = x.shape
    t = frame_count(n, win, hop)
    f = win // 2 + 1
    window = hamming(win)
    idx = np.arange(win)[None, :] + hop * np.arange(t)[:, None]
    spec = np.fft.rfft(x[:, idx] * window, n=win, axis=2)  # (M, T, F)
    ri = np.empty((2 * m, t, f), dtype=np.float64)
    ri[:m] = spec.real
    ri[m:] = spec.imag
    return Spectro(ri, win, hop, n)


def istft(ri, win=DEFAULT_WIN, hop=DEFAULT_HOP, n_samples=None):
    """Invert a single RI pair (2, T, F) to a (1, N') waveform.

    Weighted overlap-add: synthesis window equals the analysis window and
    each sample is divided by the summed squared window. Samples where
    that sum is below 1e-8 are returned as zero.
    """
    ri = np.asarray(ri, dtype=np.float64)
    if ri.ndim != 3 or ri.shape[0] != 2:
        raise StftError(f"expected (2, T, F) RI planes, got {ri.shape}")
    t = ri.shape[1]
    window = hamming(win)
    frames = np.fft.irfft(ri[0] + 1j * ri[1], n=win, axis=1)  # (T, win)
    span = (t - 1) * hop + win
    num = kernels.overlap_add(np.ascontiguousarray(frames * window), hop, span)
    den = kernels.overlap_add(
        np.ascontiguousarray(np.broadcast_to(window * window, (t, win))), hop, span)
    good = den >= WINDOW_SUM_FLOOR
    if not np.any(good):
        raise StftError("degenerate window-square overlap sum")
    out = np.zeros(span, dtype=np.float64)
    out[good] = num[good] / den[good]
    if n_samples is not None:
        if n_samples <= span:
            out = out[:n_samples]
        else:
            out = np.concatenate([out, np.zeros(n_samples - span)])
    return out[None, :]


def _apply_rir(signal, rir):
    rir = np.atleast_1d(np.asarray(rir, dtype=np.float64))
    if rir.ndim == 1:
        rir = np.broadcast_to(rir, (signal.shape[0], rir.shape[0]))
    out = np.empty_like(signal)
    for ch in range(signal.shape[0]):
        out[ch] = np.convolve(signal[ch], rir[ch])[:signal.shape[1]]
    return out


def mix(speech, noise, rir_direct=None, rir_tail=None, snr_db=0.0, ref_channel=0):
    """Form a noisy reverberant mixture: speech * (direct + tail) + scaled noise.

    The noise is scaled so that its power at the reference channel sits
    snr_db below the reverberant speech power there. rir_direct defaults
    to a unit impulse; rir_tail defaults to none.
    """
    if speech.channels != noise.channels:
        raise StftError("speech and noise channel counts differ")
    s = np.asarray(speech.samples, dtype=np.float64)
    v = np.asarray(noise.samples, dtype=np.float64)
    if v.shape[1] < s.shape[1]:
        raise StftError("noise shorter than speech")
    v = v[:, :s.shape[1]]

    direct = np.atleast_1d(np.asarray(rir_direct if rir_direct is not None else [1.0],
                                      dtype=np.float64))
    if rir_tail is not None:
        tail = np.atleast_1d(np.asarray(rir_tail, dtype=np.float64))
        size = max(direct.shape[-1], tail.shape[-1])
        h = np.zeros(size) if direct.ndim == 1 else np.zeros((direct.shape[0], size))
        h[..., :direct.shape[-1]] += direct
        h[..., :tail.shape[-1]] += tail
    else:
        h = direct
    x = _apply_rir(s, h)

    p_speech = float(np.mean(x[ref_channel] ** 2))
    if p_speech == 0.0:
        raise StftError("silent speech at the reference channel; SNR undefined")
    p_noise = float(np.mean(v[ref_channel] ** 2))
    if p_noise == 0.0:
        alpha = 0.0
    else:
        alpha = np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))
    return AudioClip(x + alpha * v, speech.sample_rate)
