"""Multichannel audio clips and RIFF/WAVE file I/O.

Reads and writes PCM 16-bit signed and IEEE float32 WAV files, mono up to
8 channels. 16-bit samples map to [-1, 1) via division by 32768.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAX_CHANNELS = 8
_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


class WavFormatError(Exception):
    pass


@dataclass
class AudioClip:
    """samples: (channels, n) float array of dimensionless amplitude."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples))
        if self.samples.ndim != 2:
            raise WavFormatError("samples must be (channels, n)")

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.length / self.sample_rate


def read_wav(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    audio_format, channels, rate, _, block_align, bits = fmt
    if audio_format == _FMT_EXTENSIBLE:
        raise WavFormatError("WAVE_FORMAT_EXTENSIBLE is not supported")
    if channels < 1 or channels > MAX_CHANNELS:
        raise WavFormatError(f"unsupported channel count {channels}")

    if audio_format == _FMT_PCM and bits == 16:
        flat = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _FMT_FLOAT and bits == 32:
        flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(f"unsupported format {audio_format}/{bits}-bit")

    nframes = len(flat) // channels
    samples = flat[:nframes * channels].reshape(nframes, channels).T
    return AudioClip(np.ascontiguousarray(samples), rate)


def write_wav(path, clip, fmt="pcm16"):
    samples = np.asarray(clip.samples)
    channels, nframes = samples.shape
    if channels < 1 or channels > MAX_CHANNELS:
        raise WavFormatError(f"unsupported channel count {channels}")
    interleaved = samples.T

    if fmt == "pcm16":
        clipped = np.clip(interleaved, -1.0, 32767.0 / 32768.0)
        payload = (np.round(clipped * 32768.0).astype("<i2")).tobytes()
        audio_format, bits = _FMT_PCM, 16
    elif fmt == "float32":
        payload = interleaved.astype("<f4").tobytes()
        audio_format, bits = _FMT_FLOAT, 32
    else:
        raise WavFormatError(f"unknown wav format {fmt!r}")

    block_align = channels * bits // 8
    byte_rate = clip.sample_rate * block_align
    with open(path, "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 4 + 8 + 16 + 8 + len(payload)))
        fh.write(b"WAVE")
        fh.write(b"fmt ")
        fh.write(struct.pack("<IHHIIHH", 16, audio_format, channels,
                             clip.sample_rate, byte_rate, block_align, bits))
        fh.write(b"data")
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)
        if len(payload) & 1:
            fh.write(b"\x00")
