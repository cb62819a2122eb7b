"""Deterministic synthetic matting data for tests, demos and the acceptance run.

Nothing here is meant to look like real photographs; the shapes only need
to exercise each image type (solid, transparent interior, non-salient) and
give the metrics something non-trivial to measure.
"""
from pathlib import Path

import numpy as np

from .datapipe import ManifestEntry, composite, write_manifest
from .imageio import write_alpha, write_rgb
from .rng import Rng, derive_seed
from .semantics import ImageType


def _grid(size):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32)
    return yy / (size - 1), xx / (size - 1)


def _soft_disk(size, cy, cx, r, edge):
    yy, xx = _grid(size)
    d = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
    return np.clip((r - d) / edge + 0.5, 0.0, 1.0).astype(np.float32)


def alpha_so(size, seed=0):
    """Opaque blob with a soft rim."""
    rng = Rng(derive_seed(seed, "so"))
    cy, cx = 0.4 + 0.2 * rng.random(2)
    return _soft_disk(size, float(cy), float(cx), 0.28, 0.06)


def alpha_stm(size, seed=0):
    """Salient object whose interior is only partly opaque (glass-like)."""
    rng = Rng(derive_seed(seed, "stm"))
    cy, cx = 0.4 + 0.2 * rng.random(2)
    yy, xx = _grid(size)
    body = _soft_disk(size, float(cy), float(cx), 0.3, 0.05)
    ripple = 0.45 + 0.25 * np.sin(12 * yy) * np.cos(9 * xx)
    return np.clip(body * ripple, 0.0, 0.9).astype(np.float32)


def alpha_ns(size, seed=0):
    """Texture-like alpha spread over the whole frame (smoke / net)."""
    rng = Rng(derive_seed(seed, "ns"))
    phase = 6.283 * rng.random(2)
    yy, xx = _grid(size)
    a = 0.5 + 0.3 * np.sin(20 * yy + float(phase[0])) * np.sin(17 * xx + float(phase[1]))
    return np.clip(a, 0.1, 0.9).astype(np.float32)


ALPHA_MAKERS = {ImageType.SO: alpha_so, ImageType.STM: alpha_stm, ImageType.NS: alpha_ns}


def foreground_rgb(size, seed=0):
    rng = Rng(derive_seed(seed, "fg"))
    base = rng.random(3).reshape(3, 1, 1)
    yy, xx = _grid(size)
    shade = 0.6 + 0.4 * np.stack([yy, xx, 1 - yy])
    return np.clip(base * shade + 0.1, 0, 1).astype(np.float32)


def background_rgb(size, seed=0):
    """High-frequency checker plus noise, so blurring it is measurable."""
    rng = Rng(derive_seed(seed, "bg"))
    yy, xx = np.mgrid[0:size, 0:size]
    period = 4 + rng.randint(0, 4)
    checker = (((yy // period) + (xx // period)) % 2).astype(np.float32)
    noise = rng.random(3 * size * size).reshape(3, size, size)
    tint = rng.random(3).reshape(3, 1, 1)
    return np.clip(0.5 * checker * tint + 0.3 * noise + 0.1, 0, 1).astype(np.float32)


SOURCE_SET = (
    ("fg_so_animal", ImageType.SO, "animal"),
    ("fg_stm_glass", ImageType.STM, "transparent"),
    ("fg_ns_net", ImageType.NS, "plant"),
)


def make_source_set(out_dir, size=256, n_backgrounds=2, seed=0):
    """Foreground source manifest plus a background directory.

    Returns (manifest_path, bg_dir).
    """
    out = Path(out_dir)
    entries = []
    for name, itype, cat in SOURCE_SET:
        s = derive_seed(seed, name)
        a = ALPHA_MAKERS[itype](size, s)
        fg = foreground_rgb(size, s)
        image = composite(fg, a, np.zeros_like(fg))
        write_rgb(out / "fg" / f"{name}.png", fg)
        write_rgb(out / "image" / f"{name}.png", image)
        write_alpha(out / "alpha" / f"{name}.png", a)
        entries.append(ManifestEntry(name, f"image/{name}.png", f"alpha/{name}.png", itype, cat,
                                     "train", fg=f"fg/{name}.png"))
    bg_dir = out / "bg"
    for k in range(n_backgrounds):
        write_rgb(bg_dir / f"bg{k:02d}.png", background_rgb(size, derive_seed(seed, f"bg{k}")))
    manifest = out / "source.jsonl"
    write_manifest(entries, manifest)
    return manifest, bg_dir


EVAL_SET = (
    ("img01", ImageType.SO, "animal"),
    ("img02", ImageType.SO, "human"),
    ("img03", ImageType.SO, "furniture"),
    ("img04", ImageType.STM, "transparent"),
    ("img05", ImageType.STM, "toy"),
    ("img06", ImageType.NS, "plant"),
)


def perturb(alpha, seed, amount=0.15):
    """A plausible 'prediction': shifted, noisy copy of the ground truth."""
    rng = Rng(derive_seed(seed, "pred"))
    shifted = np.roll(alpha, shift=(1 + rng.randint(0, 3), rng.randint(0, 3)), axis=(0, 1))
    noise = amount * (rng.random(alpha.size).reshape(alpha.shape) - 0.5)
    return np.clip(shifted + noise, 0.0, 1.0).astype(np.float32)


def make_eval_set(out_dir, size=64, seed=0):
    """Six ground-truth images (3 SO, 2 STM, 1 NS; six categories) with predictions.

    Returns (manifest_path, pred_dir).
    """
    out = Path(out_dir)
    entries = []
    for name, itype, cat in EVAL_SET:
        s = derive_seed(seed, name)
        a = ALPHA_MAKERS[itype](size, s)
        fg = foreground_rgb(size, s)
        bg = background_rgb(size, s)
        write_rgb(out / "image" / f"{name}.png", composite(fg, a, bg))
        write_alpha(out / "alpha" / f"{name}.png", a)
        write_alpha(out / "pred" / f"{name}.png", perturb(a, s))
        entries.append(ManifestEntry(name, f"image/{name}.png", f"alpha/{name}.png", itype, cat, "test"))
    manifest = out / "eval.jsonl"
    write_manifest(entries, manifest)
    return manifest, out / "pred"
