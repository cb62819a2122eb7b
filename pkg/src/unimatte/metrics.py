"""Matting error metrics and benchmark aggregation.

SAD, Grad and Conn are divided by 1000 (the usual reporting scale);
MSE and MAD are per-pixel means.
"""
from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy import ndimage

from .semantics import ImageType

GRAD_SIGMA = 1.4
CONN_THETA = 0.15
CONN_STEP = 0.1

TYPE_COLUMNS = (ImageType.SO, ImageType.STM, ImageType.NS)
# (manifest token, report column)
CATEGORY_COLUMNS = (
    ("animal", "Animal"),
    ("human", "Human"),
    ("transparent", "Transp."),
    ("plant", "Plant"),
    ("furniture", "Furni."),
    ("toy", "Toy"),
    ("fruit", "Fruit"),
)
CATEGORY_ALIASES = {"portrait": "human", "transp.": "transparent", "furni.": "furniture"}
CATEGORIES = tuple(tok for tok, _ in CATEGORY_COLUMNS)


def normalize_category(token):
    tok = str(token).strip().lower()
    tok = CATEGORY_ALIASES.get(tok, tok)
    if tok not in CATEGORIES and tok != "other":
        raise ValueError(f"unknown category {token!r}; expected one of {CATEGORIES + ('other',)}")
    return tok


def _pair(pred, gt):
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return p, g


def sad(pred, gt):
    p, g = _pair(pred, gt)
    return float(np.abs(p - g).sum() / 1000.0)


def mse(pred, gt):
    p, g = _pair(pred, gt)
    return float(np.mean((p - g) ** 2))


def mad(pred, gt):
    p, g = _pair(pred, gt)
    return float(np.mean(np.abs(p - g)))


def transition_sad(pred, gt, gt_trimap):
    p, g = _pair(pred, gt)
    t = np.asarray(gt_trimap)
    if t.shape != p.shape:
        raise ValueError(f"shape mismatch: trimap {t.shape} vs alpha {p.shape}")
    mask = t == 0.5
    return float(np.abs(p - g)[mask].sum() / 1000.0)


def _gauss(x, sigma):
    return np.exp(-x ** 2 / (2 * sigma ** 2)) / (sigma * np.sqrt(2 * np.pi))


def gaussian_derivative_filters(sigma=GRAD_SIGMA, epsilon=1e-2):
    """First-order Gaussian derivative kernels (x, y), L2-normalized."""
    half = int(np.ceil(sigma * np.sqrt(-2 * np.log(np.sqrt(2 * np.pi) * sigma * epsilon))))
    t = np.arange(-half, half + 1, dtype=np.float64)
    g = _gauss(t, sigma)
    dg = -t * g / sigma ** 2
    hx = np.outer(g, dg)  # rows: smoothing, cols: derivative
    hx /= np.sqrt(np.sum(hx * hx))
    return hx, hx.T


def _grad_magnitude(img, sigma):
    hx, hy = gaussian_derivative_filters(sigma)
    gx = ndimage.convolve(img, hx, mode="nearest")
    gy = ndimage.convolve(img, hy, mode="nearest")
    return np.sqrt(gx ** 2 + gy ** 2)


def gradient_error(pred, gt, sigma=GRAD_SIGMA):
    p, g = _pair(pred, gt)
    d = _grad_magnitude(p, sigma) - _grad_magnitude(g, sigma)
    return float(np.sum(d * d) / 1000.0)


def _thresholds(step):
    n = int(round(1.0 / step))
    return [round(i * step, 10) for i in range(n + 1)]


def _largest_component(mask):
    """Largest 4-connected component; ties go to the one met first in raster order."""
    labels, count = ndimage.label(mask)
    if count == 0:
        return np.zeros(mask.shape, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def connectivity_error(pred, gt, theta=CONN_THETA, step=CONN_STEP):
    """Connectivity error with thresholds 0, step, ..., 1.

    For every pixel, ``level`` is the last threshold at which it still
    belonged to the largest common component of {pred >= t} and {gt >= t}.
    phi = 1 - d * [d >= theta] with d = alpha - level; the error sums
    |phi_pred - phi_gt|.
    """
    p, g = _pair(pred, gt)
    ts = _thresholds(step)
    level = np.full(p.shape, -1.0)
    for i in range(1, len(ts)):
        omega = _largest_component((p >= ts[i]) & (g >= ts[i]))
        newly = (level == -1) & ~omega
        level[newly] = ts[i - 1]
    level[level == -1] = 1.0
    dp = p - level
    dg = g - level
    phi_p = 1 - dp * (dp >= theta)
    phi_g = 1 - dg * (dg >= theta)
    return float(np.sum(np.abs(phi_p - phi_g)) / 1000.0)


@dataclass
class MetricRecord:
    image_id: str
    sad: float
    mse: float
    mad: float
    conn: float
    grad: float
    sad_transition: float
    type: str
    category: str
    height: int = 0
    width: int = 0


def evaluate_image(pred, gt, gt_trimap, image_type, category, image_id=""):
    p, g = _pair(pred, gt)
    return MetricRecord(
        image_id=str(image_id),
        sad=sad(p, g),
        mse=mse(p, g),
        mad=mad(p, g),
        conn=connectivity_error(p, g),
        grad=gradient_error(p, g),
        sad_transition=transition_sad(p, g, gt_trimap),
        type=ImageType.parse(image_type).value,
        category=normalize_category(category),
        height=int(p.shape[0]),
        width=int(p.shape[1]) if p.ndim > 1 else 1,
    )


def _mean(values):
    return float(np.mean(values)) if len(values) else math.nan


def _avg_present(values):
    present = [v for v in values if not math.isnan(v)]
    return float(np.mean(present)) if present else math.nan


@dataclass
class MetricReport:
    records: list
    whole: dict              # SAD, MSE, MAD, Conn., Grad.
    transition_sad: float
    type_sad: dict           # SO, STM, NS, Avg.
    category_sad: dict       # Animal .. Fruit, Avg.
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "whole_image": self.whole,
            "transition_sad": self.transition_sad,
            "sad_type": self.type_sad,
            "sad_category": self.category_sad,
            "counts": self.counts,
            "records": [asdict(r) for r in self.records],
        }


def aggregate(records):
    """Benchmark table from per-image records.

    Records are sorted by id first so the result never depends on input
    order. Type and category averages are unweighted means over the
    columns that have at least one image.
    """
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    recs = sorted(records, key=lambda r: r.image_id)
    whole = {
        "SAD": _mean([r.sad for r in recs]),
        "MSE": _mean([r.mse for r in recs]),
        "MAD": _mean([r.mad for r in recs]),
        "Conn.": _mean([r.conn for r in recs]),
        "Grad.": _mean([r.grad for r in recs]),
    }
    tran = _mean([r.sad_transition for r in recs])
    type_sad = {t.value: _mean([r.sad for r in recs if r.type == t.value]) for t in TYPE_COLUMNS}
    type_sad["Avg."] = _avg_present(list(type_sad.values()))
    cat_sad = {col: _mean([r.sad for r in recs if r.category == tok]) for tok, col in CATEGORY_COLUMNS}
    cat_sad["Avg."] = _avg_present(list(cat_sad.values()))
    counts = {t.value: sum(r.type == t.value for r in recs) for t in TYPE_COLUMNS}
    counts.update({col: sum(r.category == tok for r in recs) for tok, col in CATEGORY_COLUMNS})
    counts["total"] = len(recs)
    return MetricReport(recs, whole, tran, type_sad, cat_sad, counts)
