#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on the hot kernels.

Run:  python benchmarks/benchmark_backends.py [--repeats N]

Imports both kernel modules directly (bypassing the env-flag selection) so
one process can time them side by side. The numba timings exclude the
first warm-up call, so JIT compilation does not pollute the numbers.
"""

import argparse
import time

import numpy as np

from deftan2 import _kernels_numba as knb
from deftan2 import _kernels_numpy as knp

CASES = [
    # (label, fn name, args builder)
    ("conv1d 128->64 k3 L254 B61",
     "conv1d_fwd",
     lambda rng: (rng.standard_normal((61, 128, 254), dtype=np.float32),
                  rng.standard_normal((64, 128, 3), dtype=np.float32), 1, 1)),
    ("conv1d 128->128 k5 dil4 L254 B61",
     "conv1d_fwd",
     lambda rng: (rng.standard_normal((61, 128, 254), dtype=np.float32),
                  rng.standard_normal((128, 128, 5), dtype=np.float32), 4, 8)),
    ("conv2d 128->64 3x3 61x257",
     "conv2d_fwd",
     lambda rng: (rng.standard_normal((1, 128, 61, 257), dtype=np.float32),
                  rng.standard_normal((64, 128, 3, 3), dtype=np.float32), 1)),
    ("conv2d 8->256 3x3 61x257",
     "conv2d_fwd",
     lambda rng: (rng.standard_normal((1, 8, 61, 257), dtype=np.float32),
                  rng.standard_normal((256, 8, 3, 3), dtype=np.float32), 1)),
    ("tconv1d 64->64 k4 L254 B61",
     "tconv1d_fwd",
     lambda rng: (rng.standard_normal((61, 64, 254), dtype=np.float32),
                  rng.standard_normal((64, 64, 4), dtype=np.float32))),
    ("depthwise 256 k5 L254 B61",
     "dwconv1d_fwd",
     lambda rng: (rng.standard_normal((61, 256, 254), dtype=np.float32),
                  rng.standard_normal((256, 5), dtype=np.float32), 1, 2)),
    ("overlap_add 249x512 hop256",
     "overlap_add",
     lambda rng: (rng.standard_normal((249, 512)), 256, 249 * 256 + 256)),
]


def time_call(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'case':<36}{'numpy':>12}{'numba':>12}{'numba/numpy':>14}")
    for label, name, build in CASES:
        call_args = build(rng)
        fn_np = getattr(knp, name)
        fn_nb = getattr(knb, name)
        fn_nb(*call_args)  # warm-up: trigger JIT
        t_np = time_call(fn_np, call_args, args.repeats)
        t_nb = time_call(fn_nb, call_args, args.repeats)
        out_np = fn_np(*call_args)
        out_nb = fn_nb(*call_args)
        err = np.max(np.abs(np.asarray(out_np) - np.asarray(out_nb)))
        flag = "" if err < 1e-3 else f"  MISMATCH {err:.2e}"
        print(f"{label:<36}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms"
              f"{t_nb / t_np:>13.2f}x{flag}")
    print("\nratios < 1 mean the numba loops beat the numpy im2col+BLAS path")


if __name__ == "__main__":
    main()
