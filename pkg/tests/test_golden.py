"""Golden tensor dump format."""

import io

import numpy as np
import pytest

from deftan2 import golden


class TestGolden:
    def test_round_trip(self, rng, tmp_path):
        arr = rng.standard_normal((3, 4, 5)).astype(np.float32)
        path = tmp_path / "t.dft2"
        golden.save_tensor(path, arr)
        np.testing.assert_array_equal(golden.load_tensor(path), arr)

    def test_header_layout(self):
        buf = io.BytesIO()
        golden.write_tensor(buf, np.arange(6, dtype=np.float32).reshape(2, 3))
        raw = buf.getvalue()
        assert raw[:4] == b"DFT2"
        assert raw[4] == 2
        assert raw[5:9] == (2).to_bytes(4, "little")
        assert raw[9:13] == (3).to_bytes(4, "little")
        assert np.frombuffer(raw[13:], dtype="<f4").tolist() == [0, 1, 2, 3, 4, 5]

    def test_float64_downcast(self):
        buf = io.BytesIO()
        golden.write_tensor(buf, np.array([1.0, 2.0], dtype=np.float64))
        buf.seek(0)
        out = golden.read_tensor(buf)
        assert out.dtype == np.float32

    def test_bad_magic(self):
        with pytest.raises(golden.GoldenFormatError):
            golden.read_tensor(io.BytesIO(b"XXXX\x01\x01\x00\x00\x00"))

    def test_truncated_payload(self):
        buf = io.BytesIO()
        golden.write_tensor(buf, np.ones(8, dtype=np.float32))
        blob = buf.getvalue()[:-4]
        with pytest.raises(golden.GoldenFormatError):
            golden.read_tensor(io.BytesIO(blob))
