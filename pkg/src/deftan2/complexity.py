"""Closed-form cost model and its reconciliation against the MAC counter.

Two formula conventions ship:

* "counter" (default): describes exactly what the implementation computes,
  so measured counter values match analytically to the integer. Sequence-
  domain (1D) convolutions cost C_in*C_out*k*L and store C_in*C_out*k
  weights; planar (2D) convolutions use k^2. The conv branch feeding
  attention queries/keys is a genuine k x k layer even on sequences, so
  its k^2 term is shared by both conventions.

* "table": the blockwise closed forms as usually quoted, which square the
  kernel even for sequence-domain convolutions and include activation
  maps in the attention memory column. Kept for reference output; the
  dense/grouped/2D forms and all attention MAC forms coincide with the
  counter convention.

Attention MAC forms cover projections plus attention matmuls and exclude
the output projection; the counter splits those under "core"/"out" scopes
so both can be read directly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import network as net
from .attention import AttnConfig, Attention
from .feedforward import EXPANSION, FfwConfig, Feedforward
from .layers import LayerNorm, PReLU
from .sdb import DenseBlock, GroupedDenseBlock, SdbConfig, SplitDenseBlock1d, SplitDenseBlock2d
from .tensor import MacCounter, Tensor, count_macs, no_grad

BLOCK_KINDS = ("dense", "grouped", "sdb2d", "sdb1d",
               "attn_vanilla", "attn_ea", "attn_cea",
               "ffw", "dcfn", "dpfn", "cfn")

PARAM_TOLERANCE = 0.10
MACS_TOLERANCE = 0.15

# Published reference budgets for the two standard profiles.
REFERENCE_PROFILES = {
    "base": {"blocks": 6, "params": 4.0e6, "macs_per_s": 64.5e9},
    "large": {"blocks": 12, "params": 7.7e6, "macs_per_s": 124.0e9},
}


def analytic_cost(kind, dims, convention="counter"):
    """(macs, memory) closed form for one block kind.

    dims keys per kind:
      dense/grouped/sdb2d: G, C, k, T, F
      sdb1d: G, C, k, L           (L = post-unfold conv length)
      attn_*: D, L  (+ k for attn_cea)
      ffw/dcfn/dpfn/cfn: D, L (+ l for the conv variants)
    """
    if convention not in ("counter", "table"):
        raise ValueError(f"unknown convention {convention!r}")
    table = convention == "table"
    d = dims
    if kind == "dense":
        factor = d["G"] * (d["G"] + 1) // 2
        mem = factor * d["C"] ** 2 * d["k"] ** 2
        return mem * d["T"] * d["F"], mem
    if kind == "grouped":
        num = (d["G"] + 1) * d["C"] ** 2 * d["k"] ** 2
        assert num % 2 == 0
        mem = num // 2
        return mem * d["T"] * d["F"], mem
    if kind == "sdb2d":
        mem = (2 * d["G"] - 1) * (d["C"] // d["G"]) ** 2 * d["k"] ** 2
        return mem * d["T"] * d["F"], mem
    if kind == "sdb1d":
        taps = d["k"] ** 2 if table else d["k"]
        mem = (2 * d["G"] - 1) * (d["C"] // d["G"]) ** 2 * taps
        return mem * d["L"], mem
    if kind == "attn_vanilla":
        macs = 2 * d["D"] * d["L"] ** 2 + 3 * d["D"] ** 2 * d["L"]
        mem = d["L"] ** 2 + 3 * d["D"] ** 2 if table else 3 * d["D"] ** 2
        return macs, mem
    if kind == "attn_ea":
        macs = 5 * d["D"] ** 2 * d["L"]
        mem = 4 * d["D"] ** 2 if table else 3 * d["D"] ** 2
        return macs, mem
    if kind == "attn_cea":
        macs = (5 + 2 * d["k"] ** 2) * d["D"] ** 2 * d["L"]
        mem = (4 + 2 * d["k"] ** 2) * d["D"] ** 2 if table else (3 + 2 * d["k"] ** 2) * d["D"] ** 2
        return macs, mem
    if kind == "ffw":
        return 8 * d["D"] ** 2 * d["L"], 8 * d["D"] ** 2
    if kind == "dcfn":
        extra = d["l"] ** 2 if table else d["l"]
        return (8 * d["D"] + 4 * extra) * d["D"] * d["L"], (8 * d["D"] + 4 * extra) * d["D"]
    if kind == "dpfn":
        extra = d["l"] ** 2 if table else d["l"]
        return (8 + 4 * extra) * d["D"] ** 2 * d["L"], (8 + 4 * extra) * d["D"] ** 2
    if kind == "cfn":
        extra = d["l"] ** 2 if table else d["l"]
        return (8 + 16 * extra) * d["D"] ** 2 * d["L"], (8 + 16 * extra) * d["D"] ** 2
    raise ValueError(f"unknown block kind {kind!r}")


def crossover_length(depth, kernel):
    """Sequence length where the quadratic attention cost overtakes the
    conv-gated efficient form: equal at (1+k^2)*D, heavier beyond."""
    return (1 + kernel ** 2) * depth


# -- measured side ------------------------------------------------------------

def _measure(forward, x):
    counter = MacCounter()
    with no_grad(), count_macs(counter):
        forward(x)
    return counter


def measure_block(kind, dims, seed=0):
    """Run one isolated block; returns (measured_macs, formula_weights).

    Attention kinds run single-head and report the "core" scope, matching
    the closed forms (which exclude the output projection).
    """
    rng = np.random.default_rng(seed)
    d = dims
    dtype = np.float64

    if kind in ("dense", "grouped", "sdb2d"):
        cfg = SdbConfig(d["G"], d["C"], d["k"])
        block = {"dense": DenseBlock, "grouped": GroupedDenseBlock,
                 "sdb2d": SplitDenseBlock2d}[kind](rng, cfg, dtype)
        x = Tensor(rng.standard_normal((1, d["C"], d["T"], d["F"])))
        counter = _measure(block, x)
        weights = sum(w.weight_count() for _, w in block.layer_weights())
        return counter.total, weights

    if kind == "sdb1d":
        cfg = SdbConfig(d["G"], d["C"], d["k"])
        block = SplitDenseBlock1d(rng, cfg, dtype)
        x = Tensor(rng.standard_normal((1, d["C"] // d["G"], d["L"] + d["G"] - 1)))
        counter = _measure(block, x)
        weights = sum(w.weight_count() for _, w in block.layer_weights())
        return counter.total, weights

    if kind.startswith("attn_"):
        variant = kind.split("_", 1)[1]
        if variant == "vanilla":
            variant_name = "vanilla"
        elif variant == "ea":
            variant_name = "ea"
        else:
            variant_name = "cea"
        cfg = AttnConfig(channels=d["D"], heads=1, kernel=d.get("k", 3),
                         variant=variant_name)
        block = Attention(rng, cfg, dtype)
        x = Tensor(rng.standard_normal((1, d["D"], d["L"])))
        counter = _measure(block, x)
        weights = sum(w.weight_count() for name, w in block.layer_weights()
                      if name != "proj_out")
        return counter.scoped_total("core"), weights

    if kind in ("ffw", "dcfn", "dpfn", "cfn"):
        cfg = FfwConfig(channels=d["D"], kernel=d.get("l", 5),
                        dilation=d.get("dilation", 1), variant=kind)
        block = Feedforward(rng, cfg, dtype)
        x = Tensor(rng.standard_normal((1, d["D"], d["L"])))
        counter = _measure(block, x)
        weights = sum(w.weight_count() for _, w in block.layer_weights())
        return counter.total, weights

    raise ValueError(f"unknown block kind {kind!r}")


# -- whole-model analytics -----------------------------------------------------

def model_analytic(config, frames, bins):
    """Per-scope forward MACs implied by the composition; exact under the
    counter convention."""
    c, g, d = config.channels, config.groups, config.embed
    k, h, l, m = config.kernel, config.heads, config.ffw_kernel, config.mics
    tf = frames * bins
    enc_k2 = net.ENCODER_KERNEL ** 2
    scopes = {}
    scopes["encoder/conv"] = 2 * m * c * enc_k2 * tf
    if config.block_2d == "sdb":
        scopes["encoder/sdb"] = (2 * g - 1) * (c // g) ** 2 * k ** 2 * tf

    def axis_scopes(prefix, batch, length):
        if config.block_1d == "sdb":
            lc = length - g + 1
            scopes[f"{prefix}/sdb"] = batch * (2 * g - 1) * d ** 2 * k * lc
            scopes[f"{prefix}/deconv"] = batch * d * d * g * lc
        elif config.block_1d == "dense":
            lc = length
            scopes[f"{prefix}/dense"] = batch * (g * (g + 1) // 2) * d ** 2 * k * lc
        elif config.block_1d == "grouped":
            lc = length
            scopes[f"{prefix}/grouped"] = batch * ((g + 1) * d ** 2 * k * lc) // 2
        else:
            lc = length
        core = 3 * d ** 2 * lc
        if config.attention == "vanilla":
            core += 2 * d * lc ** 2
        else:
            core += 2 * (d // h) ** 2 * lc * h
            if config.attention == "cea":
                taps = k ** 2 if config.qk_conv == "kxk" else k
                core += 2 * d ** 2 * taps * lc
        scopes[f"{prefix}/attn/core"] = batch * core
        scopes[f"{prefix}/attn/out"] = batch * d ** 2 * lc
        ffw = 8 * d ** 2 * lc
        if config.feedforward == "dpfn":
            ffw += 4 * d ** 2 * l * lc
        elif config.feedforward == "dcfn":
            ffw += EXPANSION * d * l * lc
        elif config.feedforward == "cfn":
            ffw += EXPANSION ** 2 * d ** 2 * l * lc
        scopes[f"{prefix}/ffw"] = batch * ffw

    for b in range(config.blocks):
        axis_scopes(f"block{b}/f", frames, bins)
        axis_scopes(f"block{b}/t", bins, frames)

    if config.block_2d == "sdb":
        scopes["decoder/deconv"] = d * 2 * g * enc_k2 * tf
        scopes["decoder/sdb"] = (2 * g - 1) * 2 ** 2 * k ** 2 * tf
    else:
        scopes["decoder/deconv"] = d * net.DECODER_CHANNELS * enc_k2 * tf
    return scopes


def count_params(model):
    """Every trainable scalar: conv kernels, biases, norm and slope params."""
    return sum(p.numel() for _, p in model.params())


def param_breakdown(model):
    weights = sum(p.numel() for name, p in model.params() if name.endswith(".kernel"))
    biases = sum(p.numel() for name, p in model.params() if name.endswith(".bias"))
    other = count_params(model) - weights - biases
    return weights, biases, other


def synthetic_clip(config, seconds, seed=0):
    rng = np.random.default_rng(seed)
    n = int(round(seconds * config.sample_rate))
    from .audio import AudioClip

    return AudioClip(rng.standard_normal((config.mics, n)), config.sample_rate)


def measure_model(model, seconds=1.0, seed=0):
    """One counted forward pass on a synthetic clip; returns (counter, T, F)."""
    config = model.config
    clip = synthetic_clip(config, seconds, seed)
    x, spec, _ = net.prepare_input(config, clip)
    counter = MacCounter()
    with no_grad(), count_macs(counter):
        model.forward_spect(x)
    return counter, spec.frames, spec.bins


def macs_per_second(model, seconds=1.0, seed=0):
    counter, _, _ = measure_model(model, seconds, seed)
    return int(round(counter.total / seconds))


# -- report -------------------------------------------------------------------

@dataclass
class CostRow:
    scope: str
    analytic_macs: int
    measured_macs: int

    @property
    def rel_diff(self):
        if self.measured_macs == 0:
            return 0.0 if self.analytic_macs == 0 else float("inf")
        return abs(self.analytic_macs - self.measured_macs) / self.measured_macs


@dataclass
class ReferenceCheck:
    name: str
    target: float
    actual: float
    tolerance: float

    @property
    def rel_diff(self):
        return abs(self.actual - self.target) / self.target

    @property
    def ok(self):
        return self.rel_diff <= self.tolerance


@dataclass
class CostReport:
    rows: list
    references: list
    params_total: int
    params_weights: int
    params_biases: int
    mics: int
    seconds: float
    frames: int
    bins: int

    @property
    def total_analytic(self):
        return sum(r.analytic_macs for r in self.rows)

    @property
    def total_measured(self):
        return sum(r.measured_macs for r in self.rows)

    def reconciled(self):
        return all(r.analytic_macs == r.measured_macs for r in self.rows)

    def ok(self):
        return self.reconciled() and all(ref.ok for ref in self.references)

    def to_text(self):
        out = io.StringIO()
        out.write(f"input: {self.mics} ch x {self.seconds:g} s "
                  f"-> {self.frames} frames x {self.bins} bins\n")
        out.write(f"params: {self.params_total:,} total "
                  f"({self.params_weights:,} kernel, {self.params_biases:,} bias)\n")
        width = max(len(r.scope) for r in self.rows) + 2
        out.write(f"{'scope':<{width}}{'analytic':>16}{'measured':>16}{'rel_diff':>10}\n")
        for r in self.rows:
            out.write(f"{r.scope:<{width}}{r.analytic_macs:>16,}"
                      f"{r.measured_macs:>16,}{r.rel_diff:>10.2e}\n")
        out.write(f"{'total':<{width}}{self.total_analytic:>16,}"
                  f"{self.total_measured:>16,}\n")
        gmacs = self.total_measured / self.seconds / 1e9
        out.write(f"measured rate: {gmacs:.2f} G MAC/s\n")
        for ref in self.references:
            status = "ok" if ref.ok else "FAIL"
            out.write(f"reference {ref.name}: target {ref.target:.3g}, "
                      f"actual {ref.actual:.4g}, rel_diff {ref.rel_diff:.1%} "
                      f"(tol {ref.tolerance:.0%}) {status}\n")
        out.write("reconciliation: " + ("exact\n" if self.reconciled() else "MISMATCH\n"))
        return out.getvalue()

    def to_csv(self):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["scope", "analytic_macs", "measured_macs", "rel_diff"])
        for r in self.rows:
            writer.writerow([r.scope, r.analytic_macs, r.measured_macs,
                             f"{r.rel_diff:.6e}"])
        writer.writerow(["total", self.total_analytic, self.total_measured, ""])
        for ref in self.references:
            writer.writerow([f"reference:{ref.name}", f"{ref.target:.6g}",
                             f"{ref.actual:.6g}", f"{ref.rel_diff:.6e}"])
        return out.getvalue()


def _matches_reference(config, blocks):
    base = net.ModelConfig(blocks=blocks)
    keys = ("mics", "channels", "groups", "embed", "unfold_kernel", "blocks",
            "kernel", "heads", "ffw_kernel", "win", "hop", "sample_rate",
            "attention", "feedforward", "block_1d", "block_2d", "qk_conv")
    return all(getattr(config, k) == getattr(base, k) for k in keys)


def reference_targets(config):
    for name, ref in REFERENCE_PROFILES.items():
        if _matches_reference(config, ref["blocks"]):
            return name, ref
    return None, None


def analyze(model, seconds=1.0, seed=0, corrupt_analytic=False):
    """Build the full reconciliation report for one model."""
    config = model.config
    counter, frames, bins = measure_model(model, seconds, seed)
    analytics = model_analytic(config, frames, bins)
    if corrupt_analytic:
        first = next(iter(analytics))
        analytics[first] += 1
    rows = [CostRow(scope, analytics.get(scope, 0), macs)
            for scope, macs in sorted(counter.per_scope.items())]
    for scope in sorted(set(analytics) - set(counter.per_scope)):
        rows.append(CostRow(scope, analytics[scope], 0))

    weights, biases, _ = param_breakdown(model)
    total = count_params(model)
    references = []
    name, ref = reference_targets(config)
    if ref is not None:
        references.append(ReferenceCheck(f"{name} params", ref["params"],
                                         float(total), PARAM_TOLERANCE))
        references.append(ReferenceCheck(f"{name} MAC/s", ref["macs_per_s"],
                                         counter.total / seconds, MACS_TOLERANCE))
    return CostReport(rows=rows, references=references, params_total=total,
                      params_weights=weights, params_biases=biases,
                      mics=config.mics, seconds=seconds, frames=frames, bins=bins)
