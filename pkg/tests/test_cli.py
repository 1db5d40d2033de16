"""Command-line interface: exit codes, outputs, config handling."""

import csv
import io

import numpy as np
import pytest

import deftan2 as d
from deftan2 import cli
from deftan2.audio import AudioClip, read_wav, write_wav

TINY = """
mics = 2
channels = 16
groups = 4
embed = 4
blocks = 2
win = 64
hop = 32
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return str(path)


@pytest.fixture
def four_second_clip(tmp_path, rng):
    path = tmp_path / "in.wav"
    write_wav(path, AudioClip(rng.standard_normal((2, 8000)) * 0.1, 16000),
              fmt="float32")
    return str(path)


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEnhance:
    def test_writes_mono_output(self, tiny_config, four_second_clip, tmp_path, capsys):
        out = str(tmp_path / "out.wav")
        code, stdout, _ = run_cli(["enhance", "--config", tiny_config,
                                   four_second_clip, out], capsys)
        assert code == 0
        clip = read_wav(out)
        assert clip.samples.shape == (1, 8000)

    def test_reference_prints_si_sdr(self, tiny_config, four_second_clip,
                                     tmp_path, rng, capsys):
        ref = tmp_path / "ref.wav"
        write_wav(ref, AudioClip(rng.standard_normal((1, 8000)) * 0.1, 16000),
                  fmt="float32")
        out = str(tmp_path / "out.wav")
        code, stdout, _ = run_cli(["enhance", "--config", tiny_config,
                                   four_second_clip, out, "--reference", str(ref)],
                                  capsys)
        assert code == 0
        line = [l for l in stdout.splitlines() if l.startswith("si_sdr_db")]
        assert len(line) == 1
        assert np.isfinite(float(line[0].split("=")[1]))

    def test_channel_mismatch_exits_2(self, tiny_config, tmp_path, rng, capsys):
        path = tmp_path / "quad.wav"
        write_wav(path, AudioClip(rng.standard_normal((4, 8000)) * 0.1, 16000))
        code, _, err = run_cli(["enhance", "--config", tiny_config,
                                str(path), str(tmp_path / "o.wav")], capsys)
        assert code == 2
        assert "channel mismatch" in err

    def test_unreadable_wav_exits_2(self, tiny_config, tmp_path, capsys):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"garbage")
        code, _, err = run_cli(["enhance", "--config", tiny_config,
                                str(bad), str(tmp_path / "o.wav")], capsys)
        assert code == 2

    def test_saved_model_round_trip(self, tiny_config, four_second_clip,
                                    tmp_path, capsys):
        cfg, _ = cli.load_run_config(tiny_config)
        model = d.build(cfg, seed=0)
        mpath = tmp_path / "m.bin"
        d.save(model, mpath)
        out = str(tmp_path / "out.wav")
        code, _, _ = run_cli(["enhance", "--model", str(mpath),
                              four_second_clip, out], capsys)
        assert code == 0


class TestAnalyze:
    def test_text_report_mentions_reconciliation(self, tiny_config, capsys):
        code, stdout, _ = run_cli(["analyze", "--config", tiny_config,
                                   "--seconds", "0.25"], capsys)
        assert code == 0
        assert "reconciliation: exact" in stdout

    def test_csv_parses(self, tiny_config, capsys):
        code, stdout, _ = run_cli(["analyze", "--config", tiny_config,
                                   "--seconds", "0.25", "--format", "csv"], capsys)
        assert code == 0
        rows = list(csv.reader(io.StringIO(stdout)))
        assert rows[0][0] == "scope"
        assert all(len(r) == 4 for r in rows)

    def test_corrupted_analytic_exits_1(self, tiny_config, capsys):
        code, stdout, _ = run_cli(["analyze", "--config", tiny_config,
                                   "--seconds", "0.25", "--corrupt-analytic"], capsys)
        assert code == 1

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("mics = 2\nwat = 9\n")
        code, _, err = run_cli(["analyze", "--config", str(path)], capsys)
        assert code == 2
        assert "wat" in err

    def test_set_overrides(self, tiny_config, capsys):
        code, stdout, _ = run_cli(["analyze", "--config", tiny_config,
                                   "--seconds", "0.25", "--set", "blocks=1"], capsys)
        assert code == 0
        assert "block1" not in stdout


class TestTrainToy:
    def _clips(self, tmp_path, rng):
        t_ax = np.arange(4000) / 16000.0
        tone = 0.5 * np.sin(2 * np.pi * 500 * t_ax)
        speech = tmp_path / "s.wav"
        write_wav(speech, AudioClip(np.stack([tone, np.roll(tone, 3)]), 16000),
                  fmt="float32")
        noise = tmp_path / "n.wav"
        write_wav(noise, AudioClip(rng.standard_normal((2, 4000)) * 0.3, 16000),
                  fmt="float32")
        return str(speech), str(noise)

    def test_zero_steps_logs_initial_only(self, tiny_config, tmp_path, rng, capsys):
        speech, noise = self._clips(tmp_path, rng)
        code, stdout, _ = run_cli(["train-toy", "--config", tiny_config,
                                   speech, noise, "--steps", "0"], capsys)
        assert code == 0
        steps = [l for l in stdout.splitlines() if l.startswith("step")]
        assert len(steps) == 1 and steps[0].startswith("step    0")

    def test_few_steps_logs_each(self, tiny_config, tmp_path, rng, capsys):
        speech, noise = self._clips(tmp_path, rng)
        code, stdout, _ = run_cli(["train-toy", "--config", tiny_config,
                                   speech, noise, "--steps", "2", "--lr", "0.01"],
                                  capsys)
        assert code == 0
        steps = [l for l in stdout.splitlines() if l.startswith("step")]
        assert len(steps) == 3

    def test_channel_mismatch_exits_2(self, tiny_config, tmp_path, rng, capsys):
        mono = tmp_path / "mono.wav"
        write_wav(mono, AudioClip(rng.standard_normal((1, 4000)) * 0.1, 16000))
        code, _, _ = run_cli(["train-toy", "--config", tiny_config,
                              str(mono), str(mono), "--steps", "0"], capsys)
        assert code == 2


class TestSelftest:
    def test_filtered_subset_passes(self, capsys):
        code, stdout, _ = run_cli(["selftest", "--filter", "shuffle"], capsys)
        assert code == 0
        assert "channel_shuffle_bijection" in stdout
        assert "1/1 passed" in stdout

    def test_deterministic_given_seed(self, capsys):
        code_a, out_a, _ = run_cli(["selftest", "--filter", "softmax",
                                    "--seed", "7"], capsys)
        code_b, out_b, _ = run_cli(["selftest", "--filter", "softmax",
                                    "--seed", "7"], capsys)
        assert (code_a, out_a) == (code_b, out_b)
