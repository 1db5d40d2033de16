"""RIFF/WAVE reader-writer round trips and error handling."""

import struct

import numpy as np
import pytest

from deftan2.audio import AudioClip, WavFormatError, read_wav, write_wav


class TestRoundTrip:
    @pytest.mark.parametrize("channels", [1, 2, 4, 8])
    def test_pcm16(self, tmp_path, rng, channels):
        x = np.clip(rng.standard_normal((channels, 777)) * 0.3, -1.0, 0.99)
        path = tmp_path / "clip.wav"
        write_wav(path, AudioClip(x, 16000), fmt="pcm16")
        back = read_wav(path)
        assert back.sample_rate == 16000
        assert back.samples.shape == (channels, 777)
        assert np.max(np.abs(back.samples - x)) <= 1.0 / 32768.0

    def test_float32_exact(self, tmp_path, rng):
        x = rng.standard_normal((3, 500)).astype(np.float32).astype(np.float64)
        path = tmp_path / "clip.wav"
        write_wav(path, AudioClip(x, 16000), fmt="float32")
        back = read_wav(path)
        np.testing.assert_array_equal(back.samples, x)

    def test_pcm16_quantization_scale(self, tmp_path):
        x = np.array([[-1.0, 0.0, 16384 / 32768.0]])
        path = tmp_path / "q.wav"
        write_wav(path, AudioClip(x, 16000), fmt="pcm16")
        raw = path.read_bytes()
        payload = raw[44:44 + 6]
        vals = struct.unpack("<3h", payload)
        assert vals == (-32768, 0, 16384)

    def test_odd_payload_padding(self, tmp_path, rng):
        x = rng.standard_normal((1, 3)) * 0.1
        path = tmp_path / "odd.wav"
        write_wav(path, AudioClip(x, 8000), fmt="pcm16")
        back = read_wav(path)
        assert back.samples.shape == (1, 3)


class TestErrors:
    def test_not_riff(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"not a wave file at all")
        with pytest.raises(WavFormatError):
            read_wav(path)

    def test_unsupported_bits(self, tmp_path):
        path = tmp_path / "b24.wav"
        payload = b"\x00" * 6
        fmt = struct.pack("<IHHIIHH", 16, 1, 1, 16000, 48000, 3, 24)
        blob = (b"RIFF" + struct.pack("<I", 4 + 8 + 16 + 8 + len(payload)) + b"WAVE"
                + b"fmt " + fmt + b"data" + struct.pack("<I", len(payload)) + payload)
        path.write_bytes(blob)
        with pytest.raises(WavFormatError):
            read_wav(path)

    def test_missing_data_chunk(self, tmp_path):
        path = tmp_path / "nodata.wav"
        fmt = struct.pack("<IHHIIHH", 16, 1, 1, 16000, 32000, 2, 16)
        path.write_bytes(b"RIFF" + struct.pack("<I", 4 + 8 + 16) + b"WAVE" + b"fmt " + fmt)
        with pytest.raises(WavFormatError):
            read_wav(path)

    def test_too_many_channels(self, tmp_path, rng):
        with pytest.raises(WavFormatError):
            write_wav(tmp_path / "x.wav",
                      AudioClip(rng.standard_normal((9, 10)), 16000))
