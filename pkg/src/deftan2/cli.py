"""Command-line front door.

Subcommands: enhance (denoise a WAV), analyze (cost reconciliation
report), train-toy (overfit one mixture with plain gradient descent), and
selftest (built-in invariant suite). Exit codes: 0 success, 1 failed
invariant or reconciliation, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import complexity, losses, network as net, selftest, spectral as stft_mod, train
from .audio import AudioClip, WavFormatError, read_wav, write_wav
from .tensor import KernelError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# config-file keys consumed by the trainer rather than the model
TRAIN_KEYS = {"lr", "loss_mode", "snr_db"}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def load_run_config(path, overrides=()):
    """Flat key=value file (unknown keys rejected) + command-line overrides."""
    mapping = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                mapping = net.parse_kv_text(fh.read())
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}")
    for item in overrides:
        if "=" not in item:
            raise CliError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    train_opts = {k: mapping.pop(k) for k in list(mapping) if k in TRAIN_KEYS}
    try:
        config = net.ModelConfig.from_mapping(mapping)
    except (net.ConfigError, ValueError) as exc:
        raise CliError(f"bad config: {exc}")
    return config, train_opts


def _load_clip(path):
    try:
        return read_wav(path)
    except (OSError, WavFormatError) as exc:
        raise CliError(f"cannot read {path}: {exc}")


def cmd_enhance(args):
    clip = _load_clip(args.input)
    if args.model:
        try:
            model = net.load(args.model)
        except (OSError, net.ModelFormatError) as exc:
            raise CliError(f"cannot load model {args.model}: {exc}")
    else:
        config, _ = load_run_config(args.config, args.set or ())
        model = net.build(config, seed=args.seed)
    if clip.channels != model.config.mics:
        raise CliError(f"channel mismatch: input has {clip.channels} channels, "
                       f"model expects {model.config.mics}")
    try:
        out = net.enhance(model, clip)
    except (KernelError, stft_mod.StftError) as exc:
        raise CliError(f"enhancement failed: {exc}")
    write_wav(args.output, out, fmt=args.wav_format)
    print(f"wrote {args.output} ({out.length} samples, {out.channels} ch)")
    if args.reference:
        ref = _load_clip(args.reference)
        if ref.length != out.length:
            raise CliError("reference length differs from output")
        score = losses.si_sdr(out.samples[0], ref.samples[0])
        print(f"si_sdr_db = {score:.2f}")
    return EXIT_OK


def cmd_analyze(args):
    config, _ = load_run_config(args.config, args.set or ())
    model = net.build(config, seed=args.seed)
    report = complexity.analyze(model, seconds=args.seconds, seed=args.seed,
                                corrupt_analytic=args.corrupt_analytic)
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_text())
    return EXIT_OK if report.ok() else EXIT_FAIL


def cmd_train_toy(args):
    config, train_opts = load_run_config(args.config, args.set or ())
    lr = args.lr if args.lr is not None else float(train_opts.get("lr", 0.05))
    loss_mode = args.loss_mode or train_opts.get("loss_mode", "verbatim")
    snr_db = float(train_opts.get("snr_db", 0.0))
    speech = _load_clip(args.speech)
    noise = _load_clip(args.noise)
    if speech.channels != config.mics or noise.channels != config.mics:
        raise CliError(f"clips must have {config.mics} channels")

    rng = np.random.default_rng(args.seed)
    echo = np.zeros(config.win // 2)
    echo[min(len(echo) - 1, config.hop // 2)] = 0.5
    try:
        mixture = stft_mod.mix(speech, noise, rir_tail=echo, snr_db=snr_db)
    except stft_mod.StftError as exc:
        raise CliError(f"cannot mix: {exc}")

    model = net.build(config, seed=args.seed)
    clean_ref = speech.samples[0:1]

    def log(step, value):
        print(f"step {step:4d}  pcm_loss {value:.6f}")

    try:
        result = train.train_overfit(model, mixture, clean_ref, steps=args.steps,
                                     lr=lr, loss_mode=loss_mode, log=log)
    except train.TrainingError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"initial {result.initial_loss:.6f} final {result.final_loss:.6f}")
    if args.save_model:
        net.save(model, args.save_model)
        print(f"saved model to {args.save_model}")
    if args.steps > 0 and result.initial_loss > 0:
        ratio = result.final_loss / result.initial_loss
        print(f"loss ratio {ratio:.4f}")
    return EXIT_OK


def cmd_selftest(args):
    ok = selftest.run(filter_substring=args.filter, seed=args.seed)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="deftan2",
                                     description="Multichannel speech enhancement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key")

    p = sub.add_parser("enhance", help="run the model on a WAV file")
    common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", metavar="PATH", help="saved model file")
    p.add_argument("--reference", metavar="PATH", help="clean WAV for SI-SDR")
    p.add_argument("--wav-format", choices=("pcm16", "float32"), default="pcm16")
    p.set_defaults(fn=cmd_enhance)

    p = sub.add_parser("analyze", help="analytic vs measured cost report")
    common(p)
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--corrupt-analytic", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("train-toy", help="overfit one synthetic mixture")
    common(p)
    p.add_argument("speech")
    p.add_argument("noise")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--loss-mode", choices=losses.LOSS_MODES, default=None)
    p.add_argument("--save-model", metavar="PATH")
    p.set_defaults(fn=cmd_train_toy)

    p = sub.add_parser("selftest", help="run the built-in invariant suite")
    common(p)
    p.add_argument("--filter", metavar="STR", help="substring to select cases")
    p.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
