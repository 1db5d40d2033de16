"""Closed-form costs vs the measured counter, plus report plumbing."""

import csv
import io

import numpy as np
import pytest

import deftan2 as d
from deftan2 import complexity
from deftan2.network import ModelConfig


def random_dims(rng):
    g = int(rng.integers(2, 5))
    return {
        "G": g,
        "C": g * int(rng.integers(1, 5)),
        "k": int(rng.choice([1, 3, 5])),
        "T": int(rng.integers(2, 7)),
        "F": int(rng.integers(2, 7)),
        "L": int(rng.integers(6, 20)),
        "D": 2 * int(rng.integers(1, 6)),
        "l": int(rng.choice([3, 5, 7])),
        "dilation": int(rng.integers(1, 3)),
    }


class TestAnalyticValues:
    def test_known_closed_forms(self):
        cases = [
            ("dense", {"G": 4, "C": 64, "k": 3, "T": 8, "F": 8}, 23_592_960),
            ("grouped", {"G": 4, "C": 64, "k": 3, "T": 8, "F": 8}, 5_898_240),
            ("sdb2d", {"G": 4, "C": 256, "k": 3, "T": 10, "F": 257}, 258_048 * 2570),
            ("sdb1d", {"G": 4, "C": 256, "k": 3, "L": 254}, 86_016 * 254),
            ("attn_vanilla", {"D": 64, "L": 100}, 2_508_800),
            ("attn_ea", {"D": 64, "L": 100}, 2_048_000),
            ("attn_cea", {"D": 64, "L": 100, "k": 3}, 9_420_800),
            ("ffw", {"D": 64, "L": 100}, 3_276_800),
            ("dcfn", {"D": 64, "L": 100, "l": 5}, 3_404_800),
            ("dpfn", {"D": 64, "L": 100, "l": 5}, 11_468_800),
            ("cfn", {"D": 64, "L": 100, "l": 5}, 36_044_800),
        ]
        for kind, dims, want in cases:
            macs, _ = complexity.analytic_cost(kind, dims)
            assert macs == want, kind

    def test_table_convention_squares_sequence_kernels(self):
        dims = {"G": 4, "C": 256, "k": 3, "L": 254}
        counter_macs, _ = complexity.analytic_cost("sdb1d", dims)
        table_macs, _ = complexity.analytic_cost("sdb1d", dims, convention="table")
        assert table_macs == counter_macs * 3  # k^2 vs k
        dims = {"D": 64, "L": 100, "l": 5}
        t_dpfn, _ = complexity.analytic_cost("dpfn", dims, convention="table")
        assert t_dpfn == 8 * (1 + 25 / 2) * 64 ** 2 * 100 == 44_236_800
        t_cfn, _ = complexity.analytic_cost("cfn", dims, convention="table")
        assert t_cfn == 8 * (1 + 2 * 25) * 64 ** 2 * 100 == 167_116_800

    def test_attention_memory_conventions(self):
        dims = {"D": 64, "L": 100, "k": 3}
        _, mem_counter = complexity.analytic_cost("attn_cea", dims)
        _, mem_table = complexity.analytic_cost("attn_cea", dims, convention="table")
        assert mem_table == (4 + 2 * 9) * 64 ** 2 == 90_112
        assert mem_counter == (3 + 2 * 9) * 64 ** 2  # weights only, no map
        _, van_table = complexity.analytic_cost("attn_vanilla", dims, convention="table")
        assert van_table == 100 ** 2 + 3 * 64 ** 2

    def test_dense_grouped_degenerate_at_one_group(self):
        dims = {"G": 1, "C": 16, "k": 3, "T": 4, "F": 4}
        dense, _ = complexity.analytic_cost("dense", dims)
        grouped, _ = complexity.analytic_cost("grouped", dims)
        assert dense == grouped == 16 * 16 * 9 * 16

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            complexity.analytic_cost("mystery", {})


class TestReconciliation:
    @pytest.mark.parametrize("kind", complexity.BLOCK_KINDS)
    def test_twenty_random_draws_exact(self, kind):
        rng = np.random.default_rng(hash(kind) % 2 ** 32)
        for draw in range(20):
            dims = random_dims(rng)
            analytic, _ = complexity.analytic_cost(kind, dims)
            measured, _ = complexity.measure_block(kind, dims, seed=draw)
            assert measured == analytic, f"{kind} draw {draw}: {dims}"

    @pytest.mark.parametrize("kind", complexity.BLOCK_KINDS)
    def test_formula_weights_match_measured(self, kind):
        rng = np.random.default_rng(99)
        dims = random_dims(rng)
        _, mem = complexity.analytic_cost(kind, dims)
        _, weights = complexity.measure_block(kind, dims, seed=0)
        assert weights == mem


class TestOrderings:
    def test_attention_and_ffw_cost_ordering(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            depth = 2 * int(rng.integers(1, 8))
            length = int(rng.integers(4, 40))
            k = int(rng.choice([3, 5]))
            l = int(rng.choice([3, 5, 7]))
            cea, cea_m = complexity.analytic_cost("attn_cea", {"D": depth, "L": length, "k": k})
            ea, ea_m = complexity.analytic_cost("attn_ea", {"D": depth, "L": length})
            assert cea > ea and cea_m > ea_m
            ffw, ffw_m = complexity.analytic_cost("ffw", {"D": depth, "L": length})
            dcfn, dcfn_m = complexity.analytic_cost("dcfn", {"D": depth, "L": length, "l": l})
            dpfn, dpfn_m = complexity.analytic_cost("dpfn", {"D": depth, "L": length, "l": l})
            cfn, cfn_m = complexity.analytic_cost("cfn", {"D": depth, "L": length, "l": l})
            assert cfn > dpfn > dcfn > ffw
            assert cfn_m > dpfn_m > dcfn_m > ffw_m

    def test_crossover_boundary_exact(self):
        for depth, k in ((16, 3), (64, 3), (64, 5)):
            boundary = complexity.crossover_length(depth, k)
            assert boundary == (1 + k * k) * depth
            for offset, sign in ((-1, -1), (0, 0), (1, 1)):
                length = boundary + offset
                van, _ = complexity.analytic_cost("attn_vanilla", {"D": depth, "L": length})
                cea, _ = complexity.analytic_cost("attn_cea",
                                                  {"D": depth, "L": length, "k": k})
                assert np.sign(van - cea) == sign


class TestModelAnalytics:
    def test_full_model_scopes_reconcile(self):
        cfg = ModelConfig(mics=2, channels=16, groups=4, embed=4, blocks=2,
                          win=64, hop=32)
        model = d.build(cfg, seed=1)
        report = complexity.analyze(model, seconds=0.25)
        assert report.reconciled()
        assert report.total_analytic == report.total_measured

    @pytest.mark.parametrize("attention", ["vanilla", "ea", "cea"])
    @pytest.mark.parametrize("feedforward", ["ffw", "dcfn", "dpfn", "cfn"])
    def test_variant_models_reconcile(self, attention, feedforward):
        cfg = ModelConfig(mics=1, channels=8, groups=2, embed=4, blocks=1,
                          unfold_kernel=2, win=64, hop=32, heads=2,
                          attention=attention, feedforward=feedforward)
        model = d.build(cfg, seed=1)
        report = complexity.analyze(model, seconds=0.125)
        assert report.reconciled()

    @pytest.mark.parametrize("block_1d", ["dense", "grouped", "none"])
    def test_ablation_front_blocks_reconcile(self, block_1d):
        cfg = ModelConfig(mics=1, channels=8, groups=2, embed=4, blocks=1,
                          unfold_kernel=2, win=64, hop=32, heads=2,
                          block_1d=block_1d)
        model = d.build(cfg, seed=1)
        assert complexity.analyze(model, seconds=0.125).reconciled()

    def test_qk_conv_1d_mode_reconciles(self):
        cfg = ModelConfig(mics=1, channels=8, groups=2, embed=4, blocks=1,
                          unfold_kernel=2, win=64, hop=32, heads=2, qk_conv="1d")
        model = d.build(cfg, seed=1)
        assert complexity.analyze(model, seconds=0.125).reconciled()

    def test_halving_blocks_roughly_halves_block_macs(self):
        cfg6 = ModelConfig(mics=2, channels=16, groups=4, embed=4, blocks=6,
                           win=64, hop=32)
        cfg3 = ModelConfig(mics=2, channels=16, groups=4, embed=4, blocks=3,
                           win=64, hop=32)
        r6 = complexity.analyze(d.build(cfg6, seed=0), seconds=0.25)
        r3 = complexity.analyze(d.build(cfg3, seed=0), seconds=0.25)

        def block_total(report):
            return sum(row.measured_macs for row in report.rows
                       if row.scope.startswith("block"))

        fixed6 = r6.total_measured - block_total(r6)
        fixed3 = r3.total_measured - block_total(r3)
        assert fixed6 == fixed3  # encoder/decoder unchanged
        assert block_total(r3) * 2 == block_total(r6)

    def test_corrupt_analytic_hook_breaks_reconciliation(self):
        cfg = ModelConfig(mics=1, channels=8, groups=2, embed=4, blocks=1,
                          unfold_kernel=2, win=64, hop=32, heads=2)
        model = d.build(cfg, seed=1)
        report = complexity.analyze(model, seconds=0.125, corrupt_analytic=True)
        assert not report.reconciled()
        assert not report.ok()

    def test_csv_output_parses(self):
        cfg = ModelConfig(mics=1, channels=8, groups=2, embed=4, blocks=1,
                          unfold_kernel=2, win=64, hop=32, heads=2)
        report = complexity.analyze(d.build(cfg, seed=1), seconds=0.125)
        rows = list(csv.reader(io.StringIO(report.to_csv())))
        assert rows[0] == ["scope", "analytic_macs", "measured_macs", "rel_diff"]
        assert any(r[0] == "total" for r in rows)


class TestReferenceTargets:
    def test_base_profile_detected(self):
        name, ref = complexity.reference_targets(ModelConfig())
        assert name == "base" and ref["params"] == 4.0e6

    def test_large_profile_detected(self):
        name, ref = complexity.reference_targets(ModelConfig(blocks=12))
        assert name == "large" and ref["macs_per_s"] == 124.0e9

    def test_nonstandard_profile_has_no_targets(self):
        name, ref = complexity.reference_targets(ModelConfig(mics=2))
        assert name is None and ref is None
