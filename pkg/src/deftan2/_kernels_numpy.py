"""Vectorized numpy kernels: im2col/gemm convolutions and overlap-add.

These are the reference implementations for every hot loop in the package.
`backend.py` swaps them for the numba versions unless DEFTAN2_BACKEND=numpy.
All convolutions are stride-1; dilation and zero padding are explicit.
Shapes follow the (batch, channels, ...) layout used throughout.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _im2col1d(x, kernel, dilation, pad):
    """(B, Ci, L) -> contiguous (B, Ci*K, Lout) patch matrix."""
    b, ci, length = x.shape
    span = dilation * (kernel - 1)
    lout = length + 2 * pad - span
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    s0, s1, s2 = x.strides
    cols = as_strided(x, (b, ci, kernel, lout), (s0, s1, s2 * dilation, s2))
    return np.ascontiguousarray(cols).reshape(b, ci * kernel, lout)


def conv1d_fwd(x, w, dilation, pad):
    b, ci, _ = x.shape
    co, _, kernel = w.shape
    cols = _im2col1d(x, kernel, dilation, pad)
    return np.matmul(w.reshape(co, ci * kernel), cols)


def conv1d_gw(x, gy, dilation, pad, kernel):
    b, ci, _ = x.shape
    co = gy.shape[1]
    cols = _im2col1d(x, kernel, dilation, pad)
    lout = gy.shape[2]
    lhs = gy.transpose(1, 0, 2).reshape(co, b * lout)
    rhs = cols.transpose(1, 0, 2).reshape(ci * kernel, b * lout)
    return (lhs @ rhs.T).reshape(co, ci, kernel)


def conv1d_gx(gy, w, dilation, pad, length):
    b, co, lout = gy.shape
    _, ci, kernel = w.shape
    gcols = np.matmul(w.reshape(co, ci * kernel).T, gy)
    gcols = gcols.reshape(b, ci, kernel, lout)
    gxp = np.zeros((b, ci, length + 2 * pad), dtype=gy.dtype)
    for k in range(kernel):
        off = k * dilation
        gxp[:, :, off:off + lout] += gcols[:, :, k, :]
    return gxp[:, :, pad:pad + length] if pad else gxp


def _im2col2d(x, kh, kw, pad):
    b, ci, h, w_ = x.shape
    hout = h + 2 * pad - (kh - 1)
    wout = w_ + 2 * pad - (kw - 1)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    s0, s1, s2, s3 = x.strides
    cols = as_strided(x, (b, ci, kh, kw, hout, wout), (s0, s1, s2, s3, s2, s3))
    return np.ascontiguousarray(cols).reshape(b, ci * kh * kw, hout * wout), hout, wout


def conv2d_fwd(x, w, pad):
    b, ci = x.shape[:2]
    co, _, kh, kw = w.shape
    cols, hout, wout = _im2col2d(x, kh, kw, pad)
    y = np.matmul(w.reshape(co, ci * kh * kw), cols)
    return y.reshape(b, co, hout, wout)


def conv2d_gw(x, gy, pad, kh, kw):
    b, ci = x.shape[:2]
    co = gy.shape[1]
    cols, hout, wout = _im2col2d(x, kh, kw, pad)
    lhs = gy.transpose(1, 0, 2, 3).reshape(co, b * hout * wout)
    rhs = cols.transpose(1, 0, 2).reshape(ci * kh * kw, b * hout * wout)
    return (lhs @ rhs.T).reshape(co, ci, kh, kw)


def conv2d_gx(gy, w, pad, h, w_in):
    b, co, hout, wout = gy.shape
    _, ci, kh, kw = w.shape
    gcols = np.matmul(w.reshape(co, ci * kh * kw).T, gy.reshape(b, co, hout * wout))
    gcols = gcols.reshape(b, ci, kh, kw, hout, wout)
    gxp = np.zeros((b, ci, h + 2 * pad, w_in + 2 * pad), dtype=gy.dtype)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i:i + hout, j:j + wout] += gcols[:, :, i, j, :, :]
    if pad:
        return gxp[:, :, pad:pad + h, pad:pad + w_in]
    return gxp


def tconv1d_fwd(x, w):
    """Stride-1 transposed conv: (B, Ci, L) x (Ci, Co, K) -> (B, Co, L+K-1)."""
    b, ci, length = x.shape
    _, co, kernel = w.shape
    y = np.zeros((b, co, length + kernel - 1), dtype=x.dtype)
    for k in range(kernel):
        y[:, :, k:k + length] += np.matmul(w[:, :, k].T, x)
    return y


def tconv1d_gx(gy, w, length):
    _, co, kernel = w.shape
    gx = np.zeros((gy.shape[0], w.shape[0], length), dtype=gy.dtype)
    for k in range(kernel):
        gx += np.matmul(w[:, :, k], gy[:, :, k:k + length])
    return gx


def tconv1d_gw(x, gy, kernel):
    b, ci, length = x.shape
    co = gy.shape[1]
    gw = np.empty((ci, co, kernel), dtype=gy.dtype)
    for k in range(kernel):
        gw[:, :, k] = np.einsum("bil,bol->io", x, gy[:, :, k:k + length], optimize=True)
    return gw


def tconv2d_fwd(x, w):
    """Stride-1 transposed 2D conv, output cropped back to the input size.

    x (B, Ci, H, W), w (Ci, Co, Kh, Kw); the full output (H+Kh-1, W+Kw-1)
    loses (Kh-1)//2 rows / (Kw-1)//2 cols on each side, so odd kernels
    preserve spatial dims.
    """
    b, ci, h, w_in = x.shape
    _, co, kh, kw = w.shape
    full = np.zeros((b, co, h + kh - 1, w_in + kw - 1), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            full[:, :, i:i + h, j:j + w_in] += np.matmul(
                w[:, :, i, j].T, x.reshape(b, ci, h * w_in)
            ).reshape(b, co, h, w_in)
    oh, ow = (kh - 1) // 2, (kw - 1) // 2
    return full[:, :, oh:oh + h, ow:ow + w_in]


def tconv2d_gx(gy, w, h, w_in):
    b, co = gy.shape[:2]
    ci, _, kh, kw = w.shape
    oh, ow = (kh - 1) // 2, (kw - 1) // 2
    gfull = np.zeros((b, co, h + kh - 1, w_in + kw - 1), dtype=gy.dtype)
    gfull[:, :, oh:oh + h, ow:ow + w_in] = gy
    gx = np.zeros((b, ci, h, w_in), dtype=gy.dtype)
    for i in range(kh):
        for j in range(kw):
            gx += np.matmul(
                w[:, :, i, j], gfull[:, :, i:i + h, j:j + w_in].reshape(b, co, h * w_in)
            ).reshape(b, ci, h, w_in)
    return gx


def tconv2d_gw(x, gy, kh, kw):
    b, ci, h, w_in = x.shape
    co = gy.shape[1]
    oh, ow = (kh - 1) // 2, (kw - 1) // 2
    gfull = np.zeros((b, co, h + kh - 1, w_in + kw - 1), dtype=gy.dtype)
    gfull[:, :, oh:oh + h, ow:ow + w_in] = gy
    gw = np.empty((ci, co, kh, kw), dtype=gy.dtype)
    xf = x.reshape(b, ci, h * w_in)
    for i in range(kh):
        for j in range(kw):
            gslab = gfull[:, :, i:i + h, j:j + w_in].reshape(b, co, h * w_in)
            gw[:, :, i, j] = np.einsum("bil,bol->io", xf, gslab, optimize=True)
    return gw


def dwconv1d_fwd(x, w, dilation, pad):
    """Depthwise 1D conv: (B, C, L) x (C, K) -> (B, C, Lout)."""
    b, c, length = x.shape
    kernel = w.shape[1]
    lout = length + 2 * pad - dilation * (kernel - 1)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    s0, s1, s2 = x.strides
    cols = as_strided(x, (b, c, kernel, lout), (s0, s1, s2 * dilation, s2))
    return np.einsum("bckl,ck->bcl", cols, w, optimize=True)


def dwconv1d_gw(x, gy, dilation, pad, kernel):
    b, c, length = x.shape
    lout = gy.shape[2]
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    s0, s1, s2 = x.strides
    cols = as_strided(x, (b, c, kernel, lout), (s0, s1, s2 * dilation, s2))
    return np.einsum("bckl,bcl->ck", cols, gy, optimize=True)


def dwconv1d_gx(gy, w, dilation, pad, length):
    b, c, lout = gy.shape
    kernel = w.shape[1]
    gxp = np.zeros((b, c, length + 2 * pad), dtype=gy.dtype)
    for k in range(kernel):
        off = k * dilation
        gxp[:, :, off:off + lout] += gy * w[None, :, k, None]
    return gxp[:, :, pad:pad + length] if pad else gxp


def overlap_add(frames, hop, out_len):
    """(T, win) windowed frames -> (out_len,) signal by summed overlap."""
    nframes, win = frames.shape
    out = np.zeros(out_len, dtype=frames.dtype)
    for t in range(nframes):
        out[t * hop:t * hop + win] += frames[t]
    return out
