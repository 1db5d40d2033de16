"""Feedforward variants: counters, impulse response, structure."""

import numpy as np
import pytest

from deftan2.feedforward import FfwConfig, Feedforward
from deftan2.tensor import MacCounter, Tensor, count_macs


def make(rng, variant, channels=64, kernel=5, dilation=1):
    return Feedforward(rng, FfwConfig(channels=channels, kernel=kernel,
                                      dilation=dilation, variant=variant), np.float64)


def macs_of(block, x):
    counter = MacCounter()
    with count_macs(counter):
        block(Tensor(x))
    return counter.total


class TestMacCounts:
    def test_vanilla(self, rng):
        block = make(rng, "ffw")
        assert macs_of(block, rng.standard_normal((1, 64, 100))) == 8 * 64 ** 2 * 100 == 3_276_800

    def test_depthwise_variant(self, rng):
        block = make(rng, "dcfn")
        got = macs_of(block, rng.standard_normal((1, 64, 100)))
        assert got == 8 * 64 ** 2 * 100 + 4 * 64 * 5 * 100 == 3_404_800

    def test_dual_path(self, rng):
        block = make(rng, "dpfn")
        got = macs_of(block, rng.standard_normal((1, 64, 100)))
        assert got == 8 * 64 ** 2 * 100 + 4 * 64 ** 2 * 5 * 100 == 11_468_800

    def test_full_conv(self, rng):
        block = make(rng, "cfn")
        got = macs_of(block, rng.standard_normal((1, 64, 100)))
        assert got == 8 * 64 ** 2 * 100 + 16 * 64 ** 2 * 5 * 100 == 36_044_800

    def test_ordering_for_fixed_dims(self, rng):
        x = rng.standard_normal((1, 16, 30))
        got = [macs_of(make(rng, v, channels=16), x) for v in ("ffw", "dcfn", "dpfn", "cfn")]
        assert got == sorted(got)
        assert len(set(got)) == 4


class TestStructure:
    @pytest.mark.parametrize("variant", ["ffw", "dcfn", "dpfn", "cfn"])
    def test_zero_output_projection_is_identity(self, rng, variant):
        block = make(rng, variant, channels=8, kernel=3)
        block.proj_out.w.kernel.data[:] = 0.0
        block.proj_out.w.bias.data[:] = 0.0
        x = rng.standard_normal((2, 8, 11))
        np.testing.assert_array_equal(block(Tensor(x)).data, x)

    def test_dilated_impulse_taps(self, rng):
        # the conv inside the dual-path branch: dilation 2, kernel 5 touches
        # exactly offsets {-4,-2,0,2,4}
        block = make(rng, "dpfn", channels=4, kernel=5, dilation=2)
        length = 21
        center = length // 2

        def second_path(xdata):
            from deftan2 import tensor as T

            h = T.gelu(block.proj_2(Tensor(xdata)))
            return block.conv(h).data

        base = np.zeros((1, 4, length))
        ref = second_path(base)
        poked = base.copy()
        poked[0, 2, center] = 1.0
        diff = np.abs(second_path(poked) - ref).sum(axis=(0, 1))
        touched = np.nonzero(diff > 1e-12)[0]
        np.testing.assert_array_equal(touched, center + np.array([-4, -2, 0, 2, 4]))

    def test_channel_counts_through_dual_path(self, rng):
        block = make(rng, "dpfn", channels=8, kernel=3)
        x = Tensor(rng.standard_normal((3, 8, 15)))
        assert block(x).shape == (3, 8, 15)
        assert block.proj_1.w.out_channels == 16
        assert block.conv.w.in_channels == 16
        assert block.proj_out.w.in_channels == 32

    def test_shape_mismatch_raises(self, rng):
        block = make(rng, "dpfn", channels=8)
        from deftan2.tensor import KernelError

        with pytest.raises(KernelError):
            block(Tensor(rng.standard_normal((1, 6, 10))))
