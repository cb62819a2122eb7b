"""Slow, loop-based reference implementations used as test oracles."""
import math
from collections import deque

import numpy as np


def conv_oracle(x, w, b, stride, pad, dil):
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh = (h + 2 * pad - dil * (kh - 1) - 1) // stride + 1
    ow = (wd + 2 * pad - dil * (kw - 1) - 1) // stride + 1
    out = np.zeros((n, oc, oh, ow))
    for bi in range(n):
        for o in range(oc):
            for i in range(oh):
                for j in range(ow):
                    s = 0.0 if b is None else float(b[o])
                    for ci in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                y = i * stride - pad + u * dil
                                xx = j * stride - pad + v * dil
                                if 0 <= y < h and 0 <= xx < wd:
                                    s += float(x[bi, ci, y, xx]) * float(w[o, ci, u, v])
                    out[bi, o, i, j] = s
    return out


def pool_oracle(x, k, stride, pad):
    n, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    vals = np.zeros((n, c, oh, ow))
    idx = np.zeros((n, c, oh, ow), dtype=np.int64)
    for bi in range(n):
        for ci in range(c):
            for i in range(oh):
                for j in range(ow):
                    best, best_i = -math.inf, -1
                    for u in range(k):
                        for v in range(k):
                            y, xx = i * stride - pad + u, j * stride - pad + v
                            if 0 <= y < h and 0 <= xx < w:
                                flat = y * w + xx
                                val = x[bi, ci, y, xx]
                                if val > best or (val == best and flat < best_i):
                                    best, best_i = val, flat
                    vals[bi, ci, i, j], idx[bi, ci, i, j] = best, best_i
    return vals, idx


def unpool_oracle(x, idx, out_size):
    n, c, h, w = x.shape
    out = np.zeros((n, c) + tuple(out_size))
    ow = out_size[1]
    for bi in range(n):
        for ci in range(c):
            for i in range(h):
                for j in range(w):
                    f = idx[bi, ci, i, j]
                    out[bi, ci, f // ow, f % ow] = x[bi, ci, i, j]
    return out


def avgpool_oracle(x, oh, ow):
    n, c, h, w = x.shape
    out = np.zeros((n, c, oh, ow))
    for i in range(oh):
        h0, h1 = math.floor(i * h / oh), math.ceil((i + 1) * h / oh)
        for j in range(ow):
            w0, w1 = math.floor(j * w / ow), math.ceil((j + 1) * w / ow)
            for bi in range(n):
                for ci in range(c):
                    s = 0.0
                    for y in range(h0, h1):
                        for xx in range(w0, w1):
                            s += x[bi, ci, y, xx]
                    out[bi, ci, i, j] = s / ((h1 - h0) * (w1 - w0))
    return out


def bilinear_oracle(x, oh, ow):
    n, c, h, w = x.shape
    out = np.zeros((n, c, oh, ow))

    def src(i, insz, outsz):
        s = max((i + 0.5) * insz / outsz - 0.5, 0.0)
        i0 = min(int(math.floor(s)), insz - 1)
        return i0, min(i0 + 1, insz - 1), s - i0

    for i in range(oh):
        y0, y1, ly = src(i, h, oh)
        for j in range(ow):
            x0, x1, lx = src(j, w, ow)
            out[:, :, i, j] = ((1 - ly) * (1 - lx) * x[:, :, y0, x0] + (1 - ly) * lx * x[:, :, y0, x1]
                               + ly * (1 - lx) * x[:, :, y1, x0] + ly * lx * x[:, :, y1, x1])
    return out


def loop_sad_mse_mad(p, g):
    h, w = p.shape
    s = sq = 0.0
    for y in range(h):
        for x in range(w):
            d = float(p[y, x]) - float(g[y, x])
            s += abs(d)
            sq += d * d
    return s / 1000, sq / (h * w), s / (h * w)


def ref_gradient(p, g, sigma=1.4):
    """Gaussian-derivative magnitude by explicit loops, edge pixels replicated."""
    eps = 1e-2
    half = math.ceil(sigma * math.sqrt(-2 * math.log(math.sqrt(2 * math.pi) * sigma * eps)))
    size = 2 * half + 1
    gauss = [math.exp(-(i - half) ** 2 / (2 * sigma ** 2)) / (sigma * math.sqrt(2 * math.pi)) for i in range(size)]
    dgauss = [-(i - half) / sigma ** 2 * gauss[i] for i in range(size)]
    kx = [[gauss[r] * dgauss[c] for c in range(size)] for r in range(size)]
    norm = math.sqrt(sum(v * v for row in kx for v in row))
    kx = [[v / norm for v in row] for row in kx]

    def mag(img):
        h, w = img.shape
        out = np.zeros((h, w))
        for y in range(h):
            for x in range(w):
                gx = gy = 0.0
                for r in range(size):
                    for c in range(size):
                        yy = min(max(y + r - half, 0), h - 1)
                        xx = min(max(x + c - half, 0), w - 1)
                        gx += kx[r][c] * img[yy, xx]
                        gy += kx[c][r] * img[yy, xx]
                out[y, x] = math.hypot(gx, gy)
        return out

    d = mag(np.asarray(p, float)) - mag(np.asarray(g, float))
    return float((d * d).sum() / 1000)


def flood_largest(mask):
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    best = []
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not seen[y, x]:
                comp, q = [], deque([(y, x)])
                seen[y, x] = True
                while q:
                    cy, cx = q.popleft()
                    comp.append((cy, cx))
                    for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            q.append((ny, nx))
                if len(comp) > len(best):
                    best = comp
    out = np.zeros_like(mask, dtype=bool)
    for cy, cx in best:
        out[cy, cx] = True
    return out


def ref_connectivity(p, g, theta=0.15, step=0.1):
    p = np.asarray(p, float)
    g = np.asarray(g, float)
    n = int(round(1 / step))
    level = np.ones(p.shape)
    assigned = np.zeros(p.shape, bool)
    for i in range(1, n + 1):
        t = round(i * step, 10)
        omega = flood_largest((p >= t) & (g >= t))
        for y in range(p.shape[0]):
            for x in range(p.shape[1]):
                if not assigned[y, x] and not omega[y, x]:
                    level[y, x] = round((i - 1) * step, 10)
                    assigned[y, x] = True
    total = 0.0
    for y in range(p.shape[0]):
        for x in range(p.shape[1]):
            dp, dg = p[y, x] - level[y, x], g[y, x] - level[y, x]
            phi_p = 1 - dp if dp >= theta else 1
            phi_g = 1 - dg if dg >= theta else 1
            total += abs(phi_p - phi_g)
    return total / 1000


def brute_erode(mask, r, border=True):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            ok = True
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    if dy * dy + dx * dx > r * r:
                        continue
                    yy, xx = y + dy, x + dx
                    inside = 0 <= yy < h and 0 <= xx < w
                    if (inside and not mask[yy, xx]) or (not inside and not border):
                        ok = False
            out[y, x] = ok
    return out


def brute_dilate(mask, r):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if dy * dy + dx * dx <= r * r and 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
                        out[y, x] = True
    return out
