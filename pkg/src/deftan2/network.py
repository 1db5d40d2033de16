"""Model assembly: encoder, stacked transformer blocks, decoder, and
waveform-to-waveform inference, plus save/load.

Encoder: 3x3 up-conv (2M -> C) + channel LayerNorm, then a 2D split dense
block down to D. Main stage: N_b blocks, each a frequency transformer
followed by a time transformer, with the feedforward dilation doubling
per block. Decoder: 3x3 transposed conv (D -> 2G) then a 2D split dense
block down to the 2 output RI planes, its last conv left linear so both
signs pass through.
"""

from __future__ import annotations

import io
import struct
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import golden, spectral as stft_mod, tensor as T
from .audio import AudioClip
from .layers import Composite, Conv2d, LayerNorm, TConv2d
from .sdb import SdbConfig, SplitDenseBlock2d
from .tensor import Tensor, mac_scope
from .transformer import (BLOCK_1D_KINDS, FrequencyTransformer, SequenceBlockConfig,
                          TimeTransformer)

MODEL_MAGIC = b"DFT2MODL"
ENCODER_KERNEL = 3
DECODER_CHANNELS = 2  # output RI planes


class ModelFormatError(Exception):
    pass


class ConfigError(Exception):
    pass


@dataclass
class ModelConfig:
    mics: int = 4
    channels: int = 256        # C, up-conv output width
    groups: int = 4            # G, subgroup count in the dense blocks
    embed: int = 64            # D, transformer width
    unfold_kernel: int = 4     # I, also the restore kernel
    unfold_stride: int = 1     # J
    blocks: int = 6            # N_b
    kernel: int = 3            # k, dense-block and attention conv kernel
    heads: int = 4             # h
    ffw_kernel: int = 5        # l
    win: int = 512
    hop: int = 256
    sample_rate: int = 16000
    attention: str = "cea"
    feedforward: str = "dpfn"
    block_1d: str = "sdb"
    block_2d: str = "sdb"
    qk_conv: str = "kxk"
    dropout_attn: float = 0.0
    dropout_out: float = 0.0
    dropout_ffw1: float = 0.0
    dropout_ffw2: float = 0.0
    dtype: str = "float32"

    def __post_init__(self):
        if self.unfold_stride != 1:
            raise ConfigError("unfold_stride must be 1")
        if self.block_1d not in BLOCK_1D_KINDS:
            raise ConfigError(f"unknown block_1d {self.block_1d!r}")
        if self.block_1d == "sdb" and self.unfold_kernel != self.groups:
            raise ConfigError("unfold_kernel must equal groups for the 1D split dense path")
        if self.block_2d == "sdb":
            if self.channels != self.groups * self.embed:
                raise ConfigError(
                    f"channels {self.channels} != groups {self.groups} * embed {self.embed}")
        elif self.block_2d == "none":
            if self.channels != self.embed:
                raise ConfigError("without a 2D dense block, channels must equal embed")
        else:
            raise ConfigError(f"unknown block_2d {self.block_2d!r}")
        if self.embed % self.heads:
            raise ConfigError("embed must be divisible by heads")
        if self.win % (2 * self.hop):
            raise ConfigError("win must be a multiple of 2*hop")
        if self.mics < 1 or self.blocks < 1:
            raise ConfigError("mics and blocks must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string keys/values, rejecting unknown keys."""
        spec = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in spec:
                raise ConfigError(f"unknown config key {key!r}")
            kind = spec[key]
            if kind == "int":
                kwargs[key] = int(value)
            elif kind == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = str(value)
        return cls(**kwargs)


def parse_kv_text(text):
    """Flat `key = value` lines; '#' starts a comment; blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


class Model(Composite):
    def __init__(self, config, seed):
        super().__init__()
        self.config = config
        self.seed = seed
        self.training = False
        self.train_rng = None
        rng = np.random.default_rng(seed)
        dt = config.np_dtype
        c, g, d = config.channels, config.groups, config.embed

        enc = self.add("encoder", Composite())
        self.enc_conv = enc.add("conv", Conv2d(rng, 2 * config.mics, c,
                                               ENCODER_KERNEL, dt, bias=False))
        self.enc_norm = enc.add("norm", LayerNorm(c, dt))
        if config.block_2d == "sdb":
            self.enc_sdb = enc.add("sdb", SplitDenseBlock2d(
                rng, SdbConfig(g, c, config.kernel), dt))
        else:
            self.enc_sdb = None

        self.block_pairs = []
        for b in range(config.blocks):
            blk = self.add(f"block{b}", Composite())
            seq_cfg = SequenceBlockConfig(
                channels=d, groups=g, kernel=config.kernel, heads=config.heads,
                ffw_kernel=config.ffw_kernel, dilation=2 ** b,
                attention=config.attention, feedforward=config.feedforward,
                block_1d=config.block_1d, qk_conv=config.qk_conv,
                dropout_attn=config.dropout_attn, dropout_out=config.dropout_out,
                dropout_ffw1=config.dropout_ffw1, dropout_ffw2=config.dropout_ffw2)
            ft = blk.add("f", FrequencyTransformer(rng, seq_cfg, dt))
            tt = blk.add("t", TimeTransformer(rng, seq_cfg, dt))
            self.block_pairs.append((ft, tt))

        dec = self.add("decoder", Composite())
        if config.block_2d == "sdb":
            self.dec_conv = dec.add("deconv", TConv2d(rng, d, 2 * g, ENCODER_KERNEL, dt))
            self.dec_sdb = dec.add("sdb", SplitDenseBlock2d(
                rng, SdbConfig(g, 2 * g, config.kernel), dt, final_activation=False))
        else:
            self.dec_conv = dec.add("deconv", TConv2d(rng, d, DECODER_CHANNELS,
                                                      ENCODER_KERNEL, dt))
            self.dec_sdb = None

    # -- modes ---------------------------------------------------------------
    def set_training(self, training, rng=None):
        self.training = training
        self.train_rng = rng
        for ft, tt in self.block_pairs:
            ft.set_training(training, rng)
            tt.set_training(training, rng)

    def parameters(self):
        return self.params()

    # -- forward -------------------------------------------------------------
    def forward_spect(self, x):
        """(1, 2M, T, F) tensor of stacked RI planes -> (1, 2, T, F) estimate."""
        if x.shape[1] != 2 * self.config.mics:
            raise T.KernelError(
                f"expected {2 * self.config.mics} input planes, got {x.shape[1]}")
        with mac_scope("encoder"):
            with mac_scope("conv"):
                h = self.enc_conv(x)
            h = self.enc_norm(h)
            if self.enc_sdb is not None:
                with mac_scope("sdb"):
                    h = self.enc_sdb(h)
        for b, (ft, tt) in enumerate(self.block_pairs):
            with mac_scope(f"block{b}"):
                with mac_scope("f"):
                    h = ft(h)
                with mac_scope("t"):
                    h = tt(h)
        with mac_scope("decoder"):
            with mac_scope("deconv"):
                h = self.dec_conv(h)
            if self.dec_sdb is not None:
                with mac_scope("sdb"):
                    h = self.dec_sdb(h)
        return h


def build(config, seed=0):
    """Deterministically initialized model; same seed, same bits."""
    return Model(config, seed)


def prepare_input(config, clip):
    """normalize -> stft -> model-dtype tensor; returns (tensor, spectro, scale)."""
    if clip.channels != config.mics:
        raise T.KernelError(
            f"channel mismatch: clip has {clip.channels}, model needs {config.mics}")
    normed, scale = stft_mod.normalize_variance(clip)
    spec = stft_mod.stft(normed, config.win, config.hop)
    x = Tensor(spec.ri[None].astype(config.np_dtype))
    return x, spec, scale


def enhance(model, clip):
    """Full pipeline on one clip; returns the de-normalized mono estimate."""
    cfg = model.config
    if clip.sample_rate != cfg.sample_rate:
        raise T.KernelError(
            f"sample rate mismatch: clip {clip.sample_rate}, model {cfg.sample_rate}")
    x, spec, scale = prepare_input(cfg, clip)
    with T.no_grad():
        out = model.forward_spect(x)
    ri = out.data[0].astype(np.float64)
    wav = stft_mod.istft(ri, cfg.win, cfg.hop, n_samples=clip.length)
    return AudioClip(wav / scale, cfg.sample_rate)


# -- persistence -------------------------------------------------------------

def save(model, path):
    """Model file: magic, length-prefixed config text, then the named
    parameter manifest as golden tensors (float32)."""
    cfg_text = model.config.to_text().encode("utf-8")
    params = model.params()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(cfg_text)))
        fh.write(cfg_text)
        fh.write(struct.pack("<I", model.seed & 0xFFFFFFFF))
        fh.write(struct.pack("<I", len(params)))
        for name, p in params:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            golden.write_tensor(fh, p.data)


def load(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    fh = io.BytesIO(blob)
    if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad model magic")
    try:
        (cfg_len,) = struct.unpack("<I", fh.read(4))
        cfg_text = fh.read(cfg_len).decode("utf-8")
        (seed,) = struct.unpack("<I", fh.read(4))
        (n_params,) = struct.unpack("<I", fh.read(4))
    except (struct.error, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: truncated header") from exc
    try:
        config = ModelConfig.from_mapping(parse_kv_text(cfg_text))
    except ConfigError as exc:
        raise ModelFormatError(f"{path}: bad config block: {exc}") from exc

    model = Model(config, seed)
    expected = model.params()
    if n_params != len(expected):
        raise ModelFormatError(
            f"{path}: manifest lists {n_params} tensors, config implies {len(expected)}")
    for name, p in expected:
        try:
            (name_len,) = struct.unpack("<I", fh.read(4))
            read_name = fh.read(name_len).decode("utf-8")
            arr = golden.read_tensor(fh)
        except (struct.error, UnicodeDecodeError, golden.GoldenFormatError) as exc:
            raise ModelFormatError(f"{path}: truncated or corrupt tensor data") from exc
        if read_name != name:
            raise ModelFormatError(f"{path}: manifest order mismatch at {read_name!r}")
        if tuple(arr.shape) != tuple(p.data.shape):
            raise ModelFormatError(
                f"{path}: tensor {name} has shape {arr.shape}, expected {p.data.shape}")
        p.data = arr.astype(config.np_dtype)
    return model
