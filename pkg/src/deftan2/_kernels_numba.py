"""Numba-compiled kernels mirroring _kernels_numpy.

Direct loop nests instead of im2col+gemm: no patch-matrix copies, and the
small kernels (3 or 5 taps) inline well. Parallel ranges only split
independent output elements, so results are bit-reproducible run to run.
Signatures match _kernels_numpy exactly; backend.py picks one set.
"""

import numpy as np
from numba import njit, prange

_JIT = dict(cache=True, parallel=True, fastmath=False)


@njit(**_JIT)
def conv1d_fwd(x, w, dilation, pad):
    b, ci, length = x.shape
    co, _, kernel = w.shape
    lout = length + 2 * pad - dilation * (kernel - 1)
    y = np.zeros((b, co, lout), dtype=x.dtype)
    for bo in prange(b * co):
        bi = bo // co
        o = bo % co
        for i in range(ci):
            for k in range(kernel):
                wv = w[o, i, k]
                if wv == 0.0:
                    continue
                base = k * dilation - pad
                lo = max(0, -base)
                hi = min(lout, length - base)
                for l in range(lo, hi):
                    y[bi, o, l] += wv * x[bi, i, l + base]
    return y


@njit(**_JIT)
def conv1d_gw(x, gy, dilation, pad, kernel):
    b, ci, length = x.shape
    co, lout = gy.shape[1], gy.shape[2]
    gw = np.zeros((co, ci, kernel), dtype=gy.dtype)
    for o in prange(co):
        for i in range(ci):
            for k in range(kernel):
                base = k * dilation - pad
                lo = max(0, -base)
                hi = min(lout, length - base)
                acc = 0.0
                for bi in range(b):
                    for l in range(lo, hi):
                        acc += gy[bi, o, l] * x[bi, i, l + base]
                gw[o, i, k] = acc
    return gw


@njit(**_JIT)
def conv1d_gx(gy, w, dilation, pad, length):
    b, co, lout = gy.shape
    ci, kernel = w.shape[1], w.shape[2]
    gx = np.zeros((b, ci, length), dtype=gy.dtype)
    for bi_i in prange(b * ci):
        bi = bi_i // ci
        i = bi_i % ci
        for o in range(co):
            for k in range(kernel):
                wv = w[o, i, k]
                if wv == 0.0:
                    continue
                base = k * dilation - pad
                lo = max(0, -base)
                hi = min(lout, length - base)
                for l in range(lo, hi):
                    gx[bi, i, l + base] += wv * gy[bi, o, l]
    return gx


@njit(**_JIT)
def conv2d_fwd(x, w, pad):
    b, ci, h, w_in = x.shape
    co, _, kh, kw = w.shape
    hout = h + 2 * pad - (kh - 1)
    wout = w_in + 2 * pad - (kw - 1)
    y = np.zeros((b, co, hout, wout), dtype=x.dtype)
    for bo in prange(b * co):
        bi = bo // co
        o = bo % co
        for i in range(ci):
            for ki in range(kh):
                for kj in range(kw):
                    wv = w[o, i, ki, kj]
                    if wv == 0.0:
                        continue
                    ri = ki - pad
                    rj = kj - pad
                    r0 = max(0, -ri)
                    r1 = min(hout, h - ri)
                    c0 = max(0, -rj)
                    c1 = min(wout, w_in - rj)
                    for r in range(r0, r1):
                        for c in range(c0, c1):
                            y[bi, o, r, c] += wv * x[bi, i, r + ri, c + rj]
    return y


@njit(**_JIT)
def conv2d_gw(x, gy, pad, kh, kw):
    b, ci, h, w_in = x.shape
    co, hout, wout = gy.shape[1], gy.shape[2], gy.shape[3]
    gw = np.zeros((co, ci, kh, kw), dtype=gy.dtype)
    for o in prange(co):
        for i in range(ci):
            for ki in range(kh):
                for kj in range(kw):
                    ri = ki - pad
                    rj = kj - pad
                    r0 = max(0, -ri)
                    r1 = min(hout, h - ri)
                    c0 = max(0, -rj)
                    c1 = min(wout, w_in - rj)
                    acc = 0.0
                    for bi in range(b):
                        for r in range(r0, r1):
                            for c in range(c0, c1):
                                acc += gy[bi, o, r, c] * x[bi, i, r + ri, c + rj]
                    gw[o, i, ki, kj] = acc
    return gw


@njit(**_JIT)
def conv2d_gx(gy, w, pad, h, w_in):
    b, co, hout, wout = gy.shape
    ci, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    gx = np.zeros((b, ci, h, w_in), dtype=gy.dtype)
    for bi_i in prange(b * ci):
        bi = bi_i // ci
        i = bi_i % ci
        for o in range(co):
            for ki in range(kh):
                for kj in range(kw):
                    wv = w[o, i, ki, kj]
                    if wv == 0.0:
                        continue
                    ri = ki - pad
                    rj = kj - pad
                    r0 = max(0, -ri)
                    r1 = min(hout, h - ri)
                    c0 = max(0, -rj)
                    c1 = min(wout, w_in - rj)
                    for r in range(r0, r1):
                        for c in range(c0, c1):
                            gx[bi, i, r + ri, c + rj] += wv * gy[bi, o, r, c]
    return gx


@njit(**_JIT)
def tconv1d_fwd(x, w):
    b, ci, length = x.shape
    co, kernel = w.shape[1], w.shape[2]
    y = np.zeros((b, co, length + kernel - 1), dtype=x.dtype)
    for bo in prange(b * co):
        bi = bo // co
        o = bo % co
        for i in range(ci):
            for k in range(kernel):
                wv = w[i, o, k]
                if wv == 0.0:
                    continue
                for l in range(length):
                    y[bi, o, l + k] += wv * x[bi, i, l]
    return y


@njit(**_JIT)
def tconv1d_gx(gy, w, length):
    b = gy.shape[0]
    ci, co, kernel = w.shape
    gx = np.zeros((b, ci, length), dtype=gy.dtype)
    for bi_i in prange(b * ci):
        bi = bi_i // ci
        i = bi_i % ci
        for o in range(co):
            for k in range(kernel):
                wv = w[i, o, k]
                for l in range(length):
                    gx[bi, i, l] += wv * gy[bi, o, l + k]
    return gx


@njit(**_JIT)
def tconv1d_gw(x, gy, kernel):
    b, ci, length = x.shape
    co = gy.shape[1]
    gw = np.zeros((ci, co, kernel), dtype=gy.dtype)
    for i in prange(ci):
        for o in range(co):
            for k in range(kernel):
                acc = 0.0
                for bi in range(b):
                    for l in range(length):
                        acc += x[bi, i, l] * gy[bi, o, l + k]
                gw[i, o, k] = acc
    return gw


@njit(**_JIT)
def tconv2d_fwd(x, w):
    b, ci, h, w_in = x.shape
    co, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    oh = (kh - 1) // 2
    ow = (kw - 1) // 2
    y = np.zeros((b, co, h, w_in), dtype=x.dtype)
    for bo in prange(b * co):
        bi = bo // co
        o = bo % co
        for i in range(ci):
            for ki in range(kh):
                for kj in range(kw):
                    wv = w[i, o, ki, kj]
                    if wv == 0.0:
                        continue
                    # full-output row ki+r lands at cropped row ki+r-oh
                    ri = ki - oh
                    rj = kj - ow
                    r0 = max(0, -ri)
                    r1 = min(h, h - ri)
                    c0 = max(0, -rj)
                    c1 = min(w_in, w_in - rj)
                    for r in range(r0, r1):
                        for c in range(c0, c1):
                            y[bi, o, r + ri, c + rj] += wv * x[bi, i, r, c]
    return y


@njit(**_JIT)
def tconv2d_gx(gy, w, h, w_in):
    b, co = gy.shape[0], gy.shape[1]
    ci, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    oh = (kh - 1) // 2
    ow = (kw - 1) // 2
    gx = np.zeros((b, ci, h, w_in), dtype=gy.dtype)
    for bi_i in prange(b * ci):
        bi = bi_i // ci
        i = bi_i % ci
        for o in range(co):
            for ki in range(kh):
                for kj in range(kw):
                    wv = w[i, o, ki, kj]
                    if wv == 0.0:
                        continue
                    ri = ki - oh
                    rj = kj - ow
                    r0 = max(0, -ri)
                    r1 = min(h, h - ri)
                    c0 = max(0, -rj)
                    c1 = min(w_in, w_in - rj)
                    for r in range(r0, r1):
                        for c in range(c0, c1):
                            gx[bi, i, r, c] += wv * gy[bi, o, r + ri, c + rj]
    return gx


@njit(**_JIT)
def tconv2d_gw(x, gy, kh, kw):
    b, ci, h, w_in = x.shape
    co = gy.shape[1]
    oh = (kh - 1) // 2
    ow = (kw - 1) // 2
    gw = np.zeros((ci, co, kh, kw), dtype=gy.dtype)
    for i in prange(ci):
        for o in range(co):
            for ki in range(kh):
                for kj in range(kw):
                    ri = ki - oh
                    rj = kj - ow
                    r0 = max(0, -ri)
                    r1 = min(h, h - ri)
                    c0 = max(0, -rj)
                    c1 = min(w_in, w_in - rj)
                    acc = 0.0
                    for bi in range(b):
                        for r in range(r0, r1):
                            for c in range(c0, c1):
                                acc += x[bi, i, r, c] * gy[bi, o, r + ri, c + rj]
                    gw[i, o, ki, kj] = acc
    return gw


@njit(**_JIT)
def dwconv1d_fwd(x, w, dilation, pad):
    b, c, length = x.shape
    kernel = w.shape[1]
    lout = length + 2 * pad - dilation * (kernel - 1)
    y = np.zeros((b, c, lout), dtype=x.dtype)
    for bc in prange(b * c):
        bi = bc // c
        i = bc % c
        for k in range(kernel):
            wv = w[i, k]
            if wv == 0.0:
                continue
            base = k * dilation - pad
            lo = max(0, -base)
            hi = min(lout, length - base)
            for l in range(lo, hi):
                y[bi, i, l] += wv * x[bi, i, l + base]
    return y


@njit(**_JIT)
def dwconv1d_gw(x, gy, dilation, pad, kernel):
    b, c, length = x.shape
    lout = gy.shape[2]
    gw = np.zeros((c, kernel), dtype=gy.dtype)
    for i in prange(c):
        for k in range(kernel):
            base = k * dilation - pad
            lo = max(0, -base)
            hi = min(lout, length - base)
            acc = 0.0
            for bi in range(b):
                for l in range(lo, hi):
                    acc += gy[bi, i, l] * x[bi, i, l + base]
            gw[i, k] = acc
    return gw


@njit(**_JIT)
def dwconv1d_gx(gy, w, dilation, pad, length):
    b, c, lout = gy.shape
    kernel = w.shape[1]
    gx = np.zeros((b, c, length), dtype=gy.dtype)
    for bc in prange(b * c):
        bi = bc // c
        i = bc % c
        for k in range(kernel):
            wv = w[i, k]
            if wv == 0.0:
                continue
            base = k * dilation - pad
            lo = max(0, -base)
            hi = min(lout, length - base)
            for l in range(lo, hi):
                gx[bi, i, l + base] += wv * gy[bi, i, l]
    return gx


@njit(cache=True)
def overlap_add(frames, hop, out_len):
    nframes, win = frames.shape
    out = np.zeros(out_len, dtype=frames.dtype)
    for t in range(nframes):
        base = t * hop
        for n in range(win):
            out[base + n] += frames[t, n]
    return out
