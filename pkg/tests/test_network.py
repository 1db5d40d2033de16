"""Model assembly, determinism, persistence, and the forward contract."""

import numpy as np
import pytest

import deftan2 as d
from deftan2 import complexity, network as net
from deftan2.audio import AudioClip
from deftan2.tensor import KernelError, MacCounter, Tensor, count_macs, no_grad


def tiny_cfg(**kw):
    base = dict(mics=2, channels=16, groups=4, embed=4, blocks=2, win=64, hop=32)
    base.update(kw)
    return d.ModelConfig(**base)


class TestConfig:
    def test_channel_consistency_enforced(self):
        with pytest.raises(net.ConfigError):
            d.ModelConfig(channels=200, groups=4, embed=64)

    def test_unfold_kernel_tied_to_groups(self):
        with pytest.raises(net.ConfigError):
            d.ModelConfig(unfold_kernel=3, groups=4)

    def test_stride_pinned_to_one(self):
        with pytest.raises(net.ConfigError):
            d.ModelConfig(unfold_stride=2)

    def test_unknown_key_rejected(self):
        with pytest.raises(net.ConfigError):
            d.ModelConfig.from_mapping({"bogus": "1"})

    def test_kv_round_trip(self):
        cfg = tiny_cfg(attention="ea", dropout_out=0.1)
        back = d.ModelConfig.from_mapping(net.parse_kv_text(cfg.to_text()))
        assert back == cfg

    def test_kv_comments_and_blanks(self):
        text = "# comment\nmics = 2\n\nchannels=16 # inline\n"
        parsed = net.parse_kv_text(text)
        assert parsed == {"mics": "2", "channels": "16"}


class TestBuild:
    def test_same_seed_bit_identical(self):
        a = d.build(tiny_cfg(), seed=9)
        b = d.build(tiny_cfg(), seed=9)
        for (na, pa), (nb, pb) in zip(a.params(), b.params()):
            assert na == nb
            assert np.array_equal(pa.data, pb.data)

    def test_different_seed_differs(self):
        a = d.build(tiny_cfg(), seed=1)
        b = d.build(tiny_cfg(), seed=2)
        assert any(not np.array_equal(pa.data, pb.data)
                   for (_, pa), (_, pb) in zip(a.params(), b.params()))

    def test_base_param_budget(self):
        model = d.build(d.ModelConfig(), seed=0)
        total = complexity.count_params(model)
        assert abs(total - 4.0e6) / 4.0e6 < 0.10

    def test_large_param_budget(self):
        model = d.build(d.ModelConfig(blocks=12), seed=0)
        total = complexity.count_params(model)
        assert abs(total - 7.7e6) / 7.7e6 < 0.10

    def test_single_pointwise_layer_param_count(self, rng):
        from deftan2.layers import Conv1d

        layer = Conv1d(rng, 64, 64, 1, np.float64, bias=False)
        assert layer.w.weight_count() == 64 ** 2


class TestForward:
    @pytest.mark.parametrize("mics", [1, 2, 4, 8])
    def test_shape_contract_across_mics(self, rng, mics):
        cfg = tiny_cfg(mics=mics)
        model = d.build(cfg, seed=0)
        for n in (2000, 4000, 6400):
            clip = AudioClip(rng.standard_normal((mics, n)), 16000)
            out = net.enhance(model, clip)
            assert out.samples.shape == (1, n)

    def test_zero_input_rejected_by_normalization(self):
        model = d.build(tiny_cfg(), seed=0)
        clip = AudioClip(np.zeros((2, 4000)), 16000)
        from deftan2.spectral import StftError

        with pytest.raises(StftError):
            net.enhance(model, clip)

    def test_near_zero_path_through_spectrogram(self, rng):
        # zero spectrogram input propagates to tiny output (biases only)
        model = d.build(tiny_cfg(), seed=0)
        x = Tensor(np.zeros((1, 4, 20, 33), dtype=np.float32))
        with no_grad():
            out = model.forward_spect(x)
        assert np.max(np.abs(out.data)) < 1.0

    def test_deterministic_inference(self, rng):
        model = d.build(tiny_cfg(), seed=0)
        clip = AudioClip(rng.standard_normal((2, 4000)), 16000)
        a = net.enhance(model, clip)
        b = net.enhance(model, clip)
        assert np.array_equal(a.samples, b.samples)

    def test_clip_shorter_than_window_rejected(self, rng):
        model = d.build(tiny_cfg(), seed=0)
        with pytest.raises(Exception):
            net.enhance(model, AudioClip(rng.standard_normal((2, 30)), 16000))

    def test_channel_mismatch_rejected(self, rng):
        model = d.build(tiny_cfg(), seed=0)
        with pytest.raises(KernelError):
            net.enhance(model, AudioClip(rng.standard_normal((3, 4000)), 16000))

    def test_sample_rate_mismatch_rejected(self, rng):
        model = d.build(tiny_cfg(), seed=0)
        with pytest.raises(KernelError):
            net.enhance(model, AudioClip(rng.standard_normal((2, 4000)), 8000))

    def test_scope_totals_decompose(self, rng):
        model = d.build(tiny_cfg(), seed=0)
        counter, _, _ = complexity.measure_model(model, seconds=0.25)
        parts = (counter.scoped_total("encoder") + counter.scoped_total("decoder")
                 + sum(counter.scoped_total(f"block{b}") for b in range(2)))
        assert parts == counter.total


class TestPersistence:
    def test_round_trip_forward_identical(self, rng, tmp_path):
        model = d.build(tiny_cfg(), seed=4)
        clip = AudioClip(rng.standard_normal((2, 4000)), 16000)
        before = net.enhance(model, clip)
        path = tmp_path / "model.dft2modl"
        net.save(model, path)
        loaded = net.load(path)
        after = net.enhance(loaded, clip)
        assert np.array_equal(before.samples, after.samples)

    def test_magic_mismatch(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMODEL" + b"\x00" * 64)
        with pytest.raises(net.ModelFormatError):
            net.load(path)

    def test_truncated_file(self, tmp_path):
        model = d.build(tiny_cfg(), seed=4)
        path = tmp_path / "model.bin"
        net.save(model, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(net.ModelFormatError):
            net.load(path)

    def test_manifest_shape_mismatch(self, tmp_path):
        model = d.build(tiny_cfg(), seed=4)
        path = tmp_path / "model.bin"
        net.save(model, path)
        blob = bytearray(path.read_bytes())
        # corrupt the config block: claim a different channel width
        text = blob.decode("latin1")
        idx = text.index("channels = 16")
        blob[idx:idx + len("channels = 16")] = b"channels = 32"
        path.write_bytes(bytes(blob))
        with pytest.raises((net.ModelFormatError, net.ConfigError)):
            net.load(path)

    def test_saved_weights_are_float32_golden(self, tmp_path):
        model = d.build(tiny_cfg(), seed=4)
        path = tmp_path / "model.bin"
        net.save(model, path)
        blob = path.read_bytes()
        assert blob.startswith(b"DFT2MODL")
        assert b"DFT2" in blob[8:]
