"""Fusion rule and training losses with analytic gradients.

Losses return ``(value, grad)``; they are plain float64 numpy functions
meant for checking and for scoring, not for driving an optimizer.
"""
from dataclasses import dataclass

import numpy as np

CHARBONNIER_EPS = 1e-6
LAPLACIAN_LEVELS = 5
_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def fuse(u, m):
    """Blend semantic map ``u`` and matting output ``m`` into the final alpha.

    The weight on ``u`` is 2|u - 0.5|, so confident regions (u in {0, 1})
    keep u and transition regions (u = 0.5) pass m through.
    """
    u = np.asarray(u)
    m = np.asarray(m)
    _same_shape(u, m, "fuse")
    conf = 2.0 * np.abs(u - 0.5)
    return (1.0 - conf) * m + conf * u


def _charbonnier(d, eps):
    r = np.sqrt(d * d + eps * eps)
    return r, d / r


def alpha_loss(pred, gt, eps=CHARBONNIER_EPS):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _same_shape(pred, gt, "alpha_loss")
    r, dr = _charbonnier(pred - gt, eps)
    n = pred.size
    return float(r.sum() / n), dr / n


# --- Laplacian pyramid -------------------------------------------------------
# Each pyramid level is a linear map of the input, so the loss gradient is
# obtained by pushing per-level L1 subgradients through the adjoint maps.


def _blur_axis(x, axis):
    r = 2
    pad = [(0, 0)] * x.ndim
    pad[axis] = (r, r)
    xp = np.pad(x, pad, mode="symmetric")
    n = x.shape[axis]
    out = np.zeros(x.shape)
    for i, k in enumerate(_BINOMIAL5):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(i, i + n)
        out += k * xp[tuple(sl)]
    return out


def _blur_axis_adjoint(y, axis):
    """Adjoint of ``_blur_axis``: full correlation, then fold the reflected border back."""
    r = 2
    n = y.shape[axis]
    shape = list(y.shape)
    shape[axis] = n + 2 * r
    full = np.zeros(shape)
    for i, k in enumerate(_BINOMIAL5):
        sl = [slice(None)] * y.ndim
        sl[axis] = slice(i, i + n)
        full[tuple(sl)] += k * y
    core = [slice(None)] * y.ndim
    core[axis] = slice(r, r + n)
    out = full[tuple(core)].copy()
    # symmetric padding: padded[r-1-j] = x[j], padded[r+n+j] = x[n-1-j]
    for j in range(r):
        src_l = [slice(None)] * y.ndim
        src_l[axis] = r - 1 - j
        dst_l = [slice(None)] * y.ndim
        dst_l[axis] = j
        out[tuple(dst_l)] += full[tuple(src_l)]
        src_r = [slice(None)] * y.ndim
        src_r[axis] = r + n + j
        dst_r = [slice(None)] * y.ndim
        dst_r[axis] = n - 1 - j
        out[tuple(dst_r)] += full[tuple(src_r)]
    return out


def _blur(x):
    return _blur_axis(_blur_axis(x, -2), -1)


def _blur_adjoint(y):
    return _blur_axis_adjoint(_blur_axis_adjoint(y, -1), -2)


def laplacian_pyramid(x, levels=LAPLACIAN_LEVELS):
    """Band-pass levels ``g - blur(g)`` followed by the low-pass residual.

    ``g`` is decimated by 2 (after blurring) between levels; the last of the
    ``levels`` entries is the coarsest low-pass image.
    """
    x = np.asarray(x, dtype=np.float64)
    pyr = []
    g = x
    for _ in range(levels - 1):
        b = _blur(g)
        pyr.append(g - b)
        g = b[..., ::2, ::2]
    pyr.append(g)
    return pyr


def _pyramid_adjoint(grads, shape):
    """Push per-level gradients (same layout as ``laplacian_pyramid``) back to the input."""
    levels = len(grads)
    shapes = [shape]
    for _ in range(levels - 1):
        h, w = shapes[-1][-2:]
        shapes.append(shapes[-1][:-2] + ((h + 1) // 2, (w + 1) // 2))
    acc = grads[-1]
    for i in range(levels - 2, -1, -1):
        up = np.zeros(shapes[i])
        up[..., ::2, ::2] = acc
        band = grads[i]
        # level i input g_i contributes to band_i = g_i - blur(g_i) and to g_{i+1} = blur(g_i)[::2, ::2]
        acc = band - _blur_adjoint(band) + _blur_adjoint(up)
    return acc


def laplacian_loss(pred, gt, levels=LAPLACIAN_LEVELS):
    """Sum over levels i=1..L of 2^(i-1) * mean|Lap_i(pred) - Lap_i(gt)|."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _same_shape(pred, gt, "laplacian_loss")
    if min(pred.shape[-2:]) < 2 ** levels:
        raise ValueError(f"laplacian_loss needs spatial dims >= {2 ** levels}, got {pred.shape[-2:]}")
    pp = laplacian_pyramid(pred, levels)
    pg = laplacian_pyramid(gt, levels)
    value = 0.0
    grads = []
    for i, (a, b) in enumerate(zip(pp, pg)):
        w = 2.0 ** i
        d = a - b
        value += w * np.abs(d).mean()
        grads.append(w * np.sign(d) / d.size)
    return float(value), _pyramid_adjoint(grads, pred.shape)


def composition_loss(pred_alpha, fg, bg, image, eps=CHARBONNIER_EPS):
    """Charbonnier mean of (alpha*F + (1-alpha)*B - I) over pixels and channels.

    ``pred_alpha`` is (H, W); ``fg``, ``bg``, ``image`` are (3, H, W).
    """
    a = np.asarray(pred_alpha, dtype=np.float64)
    fg = np.asarray(fg, dtype=np.float64)
    bg = np.asarray(bg, dtype=np.float64)
    image = np.asarray(image, dtype=np.float64)
    for name, t in (("fg", fg), ("bg", bg), ("image", image)):
        if t.ndim != 3 or t.shape[1:] != a.shape:
            raise ValueError(f"composition_loss: {name} shape {t.shape} does not match alpha {a.shape}")
    _same_shape(fg, bg, "composition_loss")
    _same_shape(fg, image, "composition_loss")
    diff = fg - bg
    r, dr = _charbonnier(a * fg + (1.0 - a) * bg - image, eps)
    n = r.size
    return float(r.sum() / n), (dr * diff).sum(axis=0) / n


def semantic_ce(logits, target):
    """Mean pixelwise cross-entropy over 3 classes; gradient wrt logits."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(target)
    if z.ndim != 4 or z.shape[1] != 3:
        raise ValueError(f"semantic_ce expects (n, 3, h, w) logits, got {z.shape}")
    if t.ndim == 2:
        t = t[None]
    if t.shape != (z.shape[0],) + z.shape[2:]:
        raise ValueError(f"target shape {t.shape} does not match logits {z.shape}")
    if not np.issubdtype(t.dtype, np.integer):
        if not np.all(np.equal(np.mod(t, 1), 0)):
            raise ValueError("semantic_ce target must hold integer class ids")
        t = t.astype(np.int64)
    if t.min() < 0 or t.max() > 2:
        raise ValueError("semantic_ce target classes must be in {0, 1, 2}")
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax + np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))
    logp = z - lse
    onehot = np.zeros_like(z)
    np.put_along_axis(onehot, t[:, None], 1.0, axis=1)
    n = t.size
    value = -(logp * onehot).sum() / n
    grad = (np.exp(logp) - onehot) / n
    return float(value), grad


@dataclass
class LossBundle:
    alpha_loss: float
    laplacian_loss: float
    composition_loss: float
    semantic_ce: float
    weights: tuple = (1.0, 1.0, 1.0, 1.0)

    @property
    def total(self):
        terms = (self.alpha_loss, self.laplacian_loss, self.composition_loss, self.semantic_ce)
        return float(sum(w * t for w, t in zip(self.weights, terms)))


def training_losses(matting_raw, fused_alpha, gt_alpha, logits, target_classes,
                    fg, bg, image, weights=(1.0, 1.0, 1.0, 1.0)):
    """Score one prediction with all four losses.

    Alpha and Laplacian terms are applied to both the raw matting output and
    the fused alpha and summed; composition applies to the fused alpha only.
    """
    a = alpha_loss(matting_raw, gt_alpha)[0] + alpha_loss(fused_alpha, gt_alpha)[0]
    lap = laplacian_loss(matting_raw, gt_alpha)[0] + laplacian_loss(fused_alpha, gt_alpha)[0]
    comp = composition_loss(fused_alpha, fg, bg, image)[0]
    ce = semantic_ce(logits, target_classes)[0]
    return LossBundle(a, lap, comp, ce, tuple(weights))
