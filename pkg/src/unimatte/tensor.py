"""Dense NCHW float32 kernels for network inference and image pipelines.

Tensors are plain ``numpy.ndarray`` objects of rank 4 (batch, channels,
height, width), dtype float32. Every function here is pure: inputs are
never modified and outputs are freshly allocated.

Reduction order: convolution reduces over (in_channels, kh, kw) with one
GEMM per block of output rows. Blocks partition output rows only, so a
reduction is never split across calls and results do not depend on the
block size. Nothing in this module spawns threads of its own.
"""
import math

import numpy as np

# Upper bound on the im2col buffer per GEMM call (bytes).
_COL_BUDGET = 64 * 1024 * 1024


def as_tensor(x) -> np.ndarray:
    """Validate and coerce to a contiguous float32 NCHW array."""
    t = np.ascontiguousarray(x, dtype=np.float32)
    if t.ndim != 4:
        raise ValueError(f"expected rank-4 NCHW tensor, got shape {t.shape}")
    if min(t.shape) < 1:
        raise ValueError(f"all tensor dimensions must be >= 1, got {t.shape}")
    return t


def _out_size(size, k, stride, padding, dilation=1):
    return (size + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def conv2d(x, w, b=None, stride=1, padding=0, dilation=1):
    """2-D cross-correlation via blocked im2col + GEMM.

    ``w`` has shape (out_c, in_c, kh, kw); ``b`` is None or (out_c,).
    Zero padding is applied symmetrically on both spatial axes.
    """
    x = as_tensor(x)
    w = np.ascontiguousarray(w, dtype=np.float32)
    n, c, h, wd = x.shape
    oc, ic, kh, kw = w.shape
    if c != ic:
        raise ValueError(f"conv2d channel mismatch: input has {c}, kernel expects {ic}")
    if stride < 1 or dilation < 1 or padding < 0:
        raise ValueError("stride and dilation must be >= 1 and padding >= 0")
    oh = _out_size(h, kh, stride, padding, dilation)
    ow = _out_size(wd, kw, stride, padding, dilation)
    if oh < 1 or ow < 1:
        raise ValueError(f"conv2d output size {oh}x{ow} < 1 for input {h}x{wd}")
    if b is not None:
        b = np.asarray(b, dtype=np.float32)
        if b.shape != (oc,):
            raise ValueError(f"bias shape {b.shape} != ({oc},)")

    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    K = ic * kh * kw
    wmat = w.reshape(oc, K)
    out = np.empty((n, oc, oh, ow), dtype=np.float32)
    rows = max(1, min(oh, _COL_BUDGET // max(1, K * ow * 4)))
    span_w = (ow - 1) * stride + 1
    for bi in range(n):
        src = xp[bi]
        for r0 in range(0, oh, rows):
            r1 = min(oh, r0 + rows)
            nr = r1 - r0
            span_h = (nr - 1) * stride + 1
            cols = np.empty((ic, kh, kw, nr, ow), dtype=np.float32)
            for i in range(kh):
                hs = r0 * stride + i * dilation
                for j in range(kw):
                    ws = j * dilation
                    cols[:, i, j] = src[:, hs:hs + span_h:stride, ws:ws + span_w:stride]
            res = wmat @ cols.reshape(K, nr * ow)
            out[bi, :, r0:r1] = res.reshape(oc, nr, ow)
    if b is not None:
        out += b[None, :, None, None]
    return out


def maxpool2d_indexed(x, k, stride, padding=0):
    """Max pooling that also returns the flat source index of each maximum.

    Indices address the un-padded input plane (``row * W + col``). Padding
    cells hold -inf so they never win. Ties go to the smallest flat index.
    """
    x = as_tensor(x)
    if k < 1 or stride < 1:
        raise ValueError("kernel and stride must be >= 1")
    if not 0 <= padding <= k // 2:
        raise ValueError(f"maxpool padding {padding} must be in [0, {k // 2}]")
    n, c, h, w = x.shape
    oh = _out_size(h, k, stride, padding)
    ow = _out_size(w, k, stride, padding)
    if oh < 1 or ow < 1:
        raise ValueError(f"maxpool output size {oh}x{ow} < 1 for input {h}x{w}")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)),
                constant_values=-np.inf) if padding else x
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :oh, :ow].reshape(n, c, oh, ow, k * k)
    # argmax returns the first hit in row-major window order == smallest flat index
    arg = np.argmax(win, axis=-1)
    values = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    wi, wj = np.divmod(arg, k)
    rows = np.arange(oh)[:, None] * stride - padding + wi
    cols = np.arange(ow)[None, :] * stride - padding + wj
    indices = (rows * w + cols).astype(np.int64)
    return np.ascontiguousarray(values, dtype=np.float32), indices


def max_unpool2d(x, indices, k, stride, out_size):
    """Scatter pooled values back to their recorded positions; zeros elsewhere.

    When overlapping windows recorded the same source index, the value
    written last in row-major order of the pooled map is kept.
    ``k`` and ``stride`` are accepted for parity with the pooling call and
    only used to sanity-check ``out_size``.
    """
    x = as_tensor(x)
    indices = np.asarray(indices)
    if indices.shape != x.shape:
        raise ValueError(f"unpool index shape {indices.shape} != value shape {x.shape}")
    oh, ow = out_size
    n, c, h, w = x.shape
    if oh < (h - 1) * stride or ow < (w - 1) * stride:
        raise ValueError(f"out_size {out_size} too small for {h}x{w} with stride {stride}")
    plane = oh * ow
    if indices.size and (indices.min() < 0 or indices.max() >= plane):
        raise IndexError(f"unpool index out of bounds for {oh}x{ow} plane")
    out = np.zeros((n * c, plane), dtype=np.float32)
    flat_idx = indices.reshape(n * c, h * w)
    flat_val = x.reshape(n * c, h * w)
    for p in range(n * c):
        # reverse so np.unique's first occurrence is the last writer
        rev_idx = flat_idx[p, ::-1]
        uniq, first = np.unique(rev_idx, return_index=True)
        out[p, uniq] = flat_val[p, ::-1][first]
    return out.reshape(n, c, oh, ow)


def _window_bounds(size, out):
    i = np.arange(out)
    starts = (i * size) // out
    ends = -((-(i + 1) * size) // out)
    return starts, ends


def adaptive_avgpool(x, out_h, out_w):
    """Average pool onto an ``out_h`` x ``out_w`` grid.

    Cell i spans [floor(i*H/out_h), ceil((i+1)*H/out_h)); same along width.
    """
    x = as_tensor(x)
    n, c, h, w = x.shape
    if not (1 <= out_h <= h and 1 <= out_w <= w):
        raise ValueError(f"adaptive pool target {out_h}x{out_w} invalid for input {h}x{w}")
    hs, he = _window_bounds(h, out_h)
    ws, we = _window_bounds(w, out_w)
    acc = x.astype(np.float64)
    out = np.empty((n, c, out_h, out_w), dtype=np.float32)
    for i in range(out_h):
        band = acc[:, :, hs[i]:he[i]].sum(axis=2)
        for j in range(out_w):
            area = (he[i] - hs[i]) * (we[j] - ws[j])
            out[:, :, i, j] = band[:, :, ws[j]:we[j]].sum(axis=2) / area
    return out


def _bilinear_axis(in_size, out_size):
    """Source indices and weights for align-corners=False resampling."""
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), in_size - 1)
    i1 = np.minimum(i0 + 1, in_size - 1)
    lam = (src - i0).astype(np.float32)
    return i0, i1, lam


def resize_bilinear(x, out_h, out_w):
    """Bilinear resampling, align-corners=False, edge-clamped."""
    x = as_tensor(x)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"resize target {out_h}x{out_w} must be >= 1")
    n, c, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return x.copy()
    r0, r1, ly = _bilinear_axis(h, out_h)
    c0, c1, lx = _bilinear_axis(w, out_w)
    ly = ly[:, None]
    rows = x[:, :, r0, :] * (1 - ly) + x[:, :, r1, :] * ly
    out = rows[:, :, :, c0] * (1 - lx) + rows[:, :, :, c1] * lx
    return np.ascontiguousarray(out, dtype=np.float32)


def upsample2x(x, mode="bilinear"):
    x = as_tensor(x)
    if mode == "nearest":
        return np.ascontiguousarray(x.repeat(2, axis=2).repeat(2, axis=3))
    if mode == "bilinear":
        return resize_bilinear(x, 2 * x.shape[2], 2 * x.shape[3])
    raise ValueError(f"unknown upsample mode {mode!r}")


def linear(x, w, b=None):
    """``w @ x + b`` for a vector or a batch of row vectors (..., in)."""
    x = np.asarray(x, dtype=np.float32)
    w = np.asarray(w, dtype=np.float32)
    if w.ndim != 2 or x.shape[-1] != w.shape[1]:
        raise ValueError(f"linear dim mismatch: x {x.shape}, w {w.shape}")
    y = x @ w.T
    if b is not None:
        b = np.asarray(b, dtype=np.float32)
        if b.shape != (w.shape[0],):
            raise ValueError(f"linear bias shape {b.shape} != ({w.shape[0]},)")
        y = y + b
    return y.astype(np.float32)


def relu(x):
    return np.maximum(x, np.float32(0)).astype(np.float32)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float32)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_channel(x):
    x = as_tensor(x)
    if x.shape[1] < 2:
        raise ValueError("softmax over channels needs at least 2 channels")
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return (e / e.sum(axis=1, keepdims=True)).astype(np.float32)


def activation(x, kind):
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "softmax_channel":
        return softmax_channel(x)
    raise ValueError(f"unknown activation {kind!r}")


def batchnorm_infer(x, mean, var, gamma, beta, eps=1e-5):
    x = as_tensor(x)
    c = x.shape[1]
    params = [np.asarray(p, dtype=np.float32) for p in (mean, var, gamma, beta)]
    for p in params:
        if p.shape != (c,):
            raise ValueError(f"batchnorm parameter length {p.shape} != ({c},)")
    mean, var, gamma, beta = params
    if np.any(var < 0):
        raise ValueError("batchnorm variance must be non-negative")
    scale = gamma / np.sqrt(var + np.float32(eps))
    shift = beta - mean * scale
    return (x * scale[None, :, None, None] + shift[None, :, None, None]).astype(np.float32)


def concat_channels(xs):
    xs = [as_tensor(t) for t in xs]
    if not xs:
        raise ValueError("concat_channels needs at least one tensor")
    n, _, h, w = xs[0].shape
    for t in xs[1:]:
        if (t.shape[0], t.shape[2], t.shape[3]) != (n, h, w):
            raise ValueError(f"concat mismatch: {xs[0].shape} vs {t.shape}")
    return np.concatenate(xs, axis=1)


def gaussian_kernel1d(sigma):
    """Sampled Gaussian, radius ceil(3*sigma), normalized to sum 1."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    radius = int(math.ceil(3 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _filter_axis(x, k, axis):
    """Correlate along ``axis`` with symmetric (half-sample) reflection."""
    r = len(k) // 2
    pad = [(0, 0)] * x.ndim
    pad[axis] = (r, r)
    xp = np.pad(x, pad, mode="symmetric")
    n = x.shape[axis]
    out = np.zeros_like(x, dtype=np.float64)
    for i, kv in enumerate(k):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(i, i + n)
        out += kv * xp[tuple(sl)]
    return out


def gaussian_blur2d(x, sigma):
    """Separable Gaussian blur, border reflected about the pixel edge (d c b a | a b c d).

    That reflection makes the operator symmetric, so along with a unit-sum
    kernel it preserves the image mean.
    """
    x = as_tensor(x)
    k = gaussian_kernel1d(sigma)
    y = _filter_axis(x.astype(np.float64), k, axis=2)
    y = _filter_axis(y, k, axis=3)
    return y.astype(np.float32)
