"""Trimaps, their unified (trimap / duomap / unimap) form, and class encodings."""
import enum

import numpy as np
from scipy import ndimage

FG_THRESH = 0.95
BG_THRESH = 0.05
DEFAULT_RADIUS = 10
TYPE_FRACTION = 0.05
REP_VALUES = (0.0, 0.5, 1.0)


class ImageType(str, enum.Enum):
    SO = "SO"    # salient opaque
    STM = "STM"  # salient transparent / meticulous
    NS = "NS"    # non-salient

    @classmethod
    def parse(cls, token):
        if isinstance(token, cls):
            return token
        try:
            return cls(str(token).strip().upper())
        except ValueError:
            raise ValueError(f"unknown image type {token!r}; expected SO, STM or NS") from None


def check_alpha(alpha):
    a = np.asarray(alpha, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError(f"alpha matte must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or a.min(initial=0) < 0 or a.max(initial=0) > 1:
        raise ValueError("alpha matte values must be finite and in [0, 1]")
    return a


def disk(radius):
    """Boolean disk structuring element {(dy, dx): dy^2 + dx^2 <= r^2}."""
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (yy * yy + xx * xx) <= r * r


def trimap_from_alpha(alpha, erode_px=DEFAULT_RADIUS, dilate_px=DEFAULT_RADIUS,
                      fg_thresh=FG_THRESH, bg_thresh=BG_THRESH):
    """Trimap in {0, 0.5, 1}: eroded solid foreground, complement of dilated support.

    Pixels beyond the image border count as foreground for erosion and as
    background for dilation, so objects touching the frame are not eroded
    from outside.
    """
    a = check_alpha(alpha)
    if erode_px < 0 or dilate_px < 0:
        raise ValueError("erosion/dilation radii must be >= 0")
    fg = a >= fg_thresh
    support = a > bg_thresh
    if erode_px:
        fg = ndimage.binary_erosion(fg, structure=disk(erode_px), border_value=1)
    if dilate_px:
        support = ndimage.binary_dilation(support, structure=disk(dilate_px), border_value=0)
    tri = np.full(a.shape, 0.5, dtype=np.float32)
    tri[~support] = 0.0
    tri[fg] = 1.0
    return tri


def check_rep(u):
    u = np.asarray(u, dtype=np.float32)
    bad = ~np.isin(u, REP_VALUES)
    if bad.any():
        raise ValueError(f"value {float(u[bad][0])!r} is not one of {{0, 0.5, 1}}")
    return u


def unify(trimap, image_type):
    """Map a trimap to the unified representation for its image type.

    SO keeps the trimap; STM applies 1.5*T - T^2 (foreground collapses onto
    the transition value, giving a duomap); NS is the constant 0.5 unimap.
    """
    t = check_rep(trimap)
    image_type = ImageType.parse(image_type)
    if image_type is ImageType.SO:
        return t.copy()
    if image_type is ImageType.STM:
        return (1.5 * t - t * t).astype(np.float32)
    return np.full(t.shape, 0.5, dtype=np.float32)


def classify_type(alpha, fraction=TYPE_FRACTION):
    """Heuristic image type from the alpha histogram.

    Stand-in for manual labels; a type given in a manifest always wins.
    """
    a = check_alpha(alpha)
    f1 = float(np.mean(a >= FG_THRESH))
    f0 = float(np.mean(a <= BG_THRESH))
    if f0 < fraction:
        return ImageType.NS
    if f1 < fraction:
        return ImageType.STM
    return ImageType.SO


def rep_to_classes(u):
    """{0, 0.5, 1} -> {0 bg, 1 transition, 2 fg}."""
    u = check_rep(u)
    return np.rint(u * 2).astype(np.int64)


def classes_to_rep(classes):
    c = np.asarray(classes)
    if not np.isin(c, (0, 1, 2)).all():
        raise ValueError("class map values must be in {0, 1, 2}")
    return (c.astype(np.float32) / 2).astype(np.float32)


def semantic_iou_accuracy(pred, gt):
    """Pixel accuracy and class-mean IoU over classes present in ``gt``."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    accuracy = float(np.mean(pred == gt))
    ious = []
    for k in np.unique(gt):
        p = pred == k
        g = gt == k
        ious.append(np.sum(p & g) / np.sum(p | g))
    return float(np.mean(ious)), accuracy
