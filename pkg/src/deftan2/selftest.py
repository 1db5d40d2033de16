"""Built-in invariant suite behind the `selftest` CLI command.

Each case is a named callable returning (ok, detail); failures do not stop
the run. These are quick structural checks, not the full pytest suite.
"""

from __future__ import annotations

import numpy as np

from . import complexity, losses, network as net, spectral as stft_mod, tensor as T
from .attention import AttnConfig, Attention
from .audio import AudioClip
from .feedforward import FfwConfig, Feedforward
from .sdb import SdbConfig, SplitDenseBlock1d
from .tensor import Tensor


def _stft_round_trip(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        sig = rng.standard_normal((1, 16000))
        spec = stft_mod.stft(AudioClip(sig, 16000))
        ri = np.stack([spec.ri[0], spec.ri[1]])
        back = stft_mod.istft(ri, n_samples=16000)
        span = (spec.frames - 1) * spec.hop + spec.win
        err = np.linalg.norm(back[0, :span] - sig[0, :span]) / np.linalg.norm(sig[0, :span])
        worst = max(worst, err)
    return worst < 1e-6, f"worst relative error {worst:.2e}"


def _shuffle_bijection(seed):
    rng = np.random.default_rng(seed)
    for groups, sub in ((2, 3), (4, 4), (4, 64), (8, 2)):
        x = Tensor(rng.standard_normal((2, groups * sub, 7)))
        y = T.channel_unshuffle(T.channel_shuffle(x, groups), groups)
        if not np.array_equal(y.data, x.data):
            return False, f"G={groups} D={sub} not restored"
        perm = T.shuffle_permutation(groups * sub, groups)
        if sorted(perm.tolist()) != list(range(groups * sub)):
            return False, "not a permutation"
    return True, "shuffle/unshuffle identity holds"


def _unfold_restore(seed):
    rng = np.random.default_rng(seed)
    for _ in range(5):
        g = int(rng.integers(2, 6))
        length = int(rng.integers(g, g + 40))
        d = int(rng.integers(1, 5))
        x = rng.standard_normal((1, d, length))
        u = T.unfold1d(Tensor(x), g)
        w = rng.standard_normal((d * g, d, g))
        y = T.transposed_conv1d(Tensor(u.data[:, :1, :]), Tensor(rng.standard_normal((1, d, g))))
        if u.data.shape != (1, g * d, length - g + 1):
            return False, f"unfold shape {u.data.shape}"
        if y.data.shape[2] != length:
            return False, f"restored length {y.data.shape[2]} != {length}"
    return True, "unfold shortens by G-1, transposed conv restores"


def _softmax_normalization(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((3, 8, 11)))
    for axis in (1, 2):
        s = T.softmax(x, axis=axis).data.sum(axis=axis)
        if np.max(np.abs(s - 1.0)) > 1e-6:
            return False, f"axis {axis} sums off by {np.max(np.abs(s - 1.0)):.2e}"
    return True, "softmax sums to 1 on both axes"


def _residual_identity(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((2, 8, 20)))
    attn = Attention(np.random.default_rng(seed), AttnConfig(channels=8, heads=2), np.float64)
    attn.proj_out.w.kernel.data[:] = 0.0
    if attn.proj_out.w.bias is not None:
        attn.proj_out.w.bias.data[:] = 0.0
    if np.max(np.abs(attn(x).data - x.data)) > 0:
        return False, "attention with zero output projection is not identity"
    ffw = Feedforward(np.random.default_rng(seed), FfwConfig(channels=8), np.float64)
    ffw.proj_out.w.kernel.data[:] = 0.0
    ffw.proj_out.w.bias.data[:] = 0.0
    if np.max(np.abs(ffw(x).data - x.data)) > 0:
        return False, "feedforward with zero output projection is not identity"
    return True, "zeroed output projections give exact identity"


def _gradient_spot_check(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((1, 3, 12)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 3, 3)), requires_grad=True)
    loss = T.mean_all(T.absolute(T.conv1d(x, w, pad=1)))
    loss.backward()
    eps = 1e-6
    idx = (1, 2, 1)
    base = w.data.copy()
    w.data = base.copy()
    w.data[idx] += eps
    up = T.mean_all(T.absolute(T.conv1d(Tensor(x.data), w, pad=1))).item()
    w.data = base.copy()
    w.data[idx] -= eps
    dn = T.mean_all(T.absolute(T.conv1d(Tensor(x.data), w, pad=1))).item()
    w.data = base
    fd = (up - dn) / (2 * eps)
    rel = abs(fd - w.grad[idx]) / max(abs(fd), 1e-12)
    return rel < 1e-4, f"conv1d weight grad rel err {rel:.2e}"


def _formula_reconciliation(seed):
    rng = np.random.default_rng(seed)
    for kind in complexity.BLOCK_KINDS:
        g = int(rng.integers(2, 5))
        dims = {
            "G": g, "C": g * int(rng.integers(1, 4)), "k": int(rng.choice([1, 3])),
            "T": int(rng.integers(2, 6)), "F": int(rng.integers(2, 6)),
            "L": int(rng.integers(6, 16)), "D": 2 * int(rng.integers(1, 5)),
            "l": int(rng.choice([3, 5])),
        }
        macs, _ = complexity.analytic_cost(kind, dims)
        measured, _ = complexity.measure_block(kind, dims, seed=seed)
        if macs != measured:
            return False, f"{kind}: analytic {macs} != measured {measured}"
    return True, "analytic == measured for all block kinds"


def _crossover(seed):
    for depth, kernel in ((16, 3), (64, 3), (64, 5)):
        boundary = complexity.crossover_length(depth, kernel)
        for offset, expect in ((-1, -1), (0, 0), (1, 1)):
            length = boundary + offset
            van, _ = complexity.analytic_cost("attn_vanilla", {"D": depth, "L": length})
            cea, _ = complexity.analytic_cost("attn_cea",
                                              {"D": depth, "L": length, "k": kernel})
            sign = (van > cea) - (van < cea)
            if sign != expect:
                return False, f"D={depth} k={kernel} L={length}: sign {sign} != {expect}"
    return True, "vanilla/conv-attention cost crossover sits at (1+k^2)*D"


def _loss_metric_sanity(seed):
    rng = np.random.default_rng(seed)
    ref = rng.standard_normal(4000)
    if abs(losses.si_sdr(2.0 * ref, ref) - losses.SI_SDR_CAP_DB) > 1e-9:
        return False, "scaled copy did not hit the cap"
    spec = Tensor(rng.standard_normal((2, 5, 7)))
    if losses.stft_mag_loss(spec, spec).item() != 0.0:
        return False, "self loss not zero"
    return True, "SI-SDR scale invariance and zero self-loss hold"


CASES = [
    ("stft_round_trip", _stft_round_trip),
    ("channel_shuffle_bijection", _shuffle_bijection),
    ("unfold_restore_length", _unfold_restore),
    ("softmax_normalization", _softmax_normalization),
    ("residual_identity", _residual_identity),
    ("gradient_spot_check", _gradient_spot_check),
    ("formula_reconciliation", _formula_reconciliation),
    ("attention_cost_crossover", _crossover),
    ("loss_metric_sanity", _loss_metric_sanity),
]


def run(filter_substring=None, seed=0, out=print):
    selected = [(name, fn) for name, fn in CASES
                if not filter_substring or filter_substring in name]
    failures = 0
    for name, fn in selected:
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        failures += not ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:<32} {detail}")
    out(f"{len(selected) - failures}/{len(selected)} passed")
    return failures == 0
