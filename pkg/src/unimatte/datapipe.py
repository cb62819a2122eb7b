"""Compositing, augmentation and manifest handling for matting datasets."""
from dataclasses import asdict, dataclass
import json
from pathlib import Path

import numpy as np

from . import tensor as T
from .imageio import read_alpha
from .metrics import CATEGORIES, normalize_category
from .rng import Rng, derive_seed
from .semantics import ImageType, classify_type

CROP_SIZES = (640, 960, 1280)
TRAIN_SIZE = 320
DEFAULT_BOKEH_SIGMA = 10.0
# Backgrounds per foreground, by source set.
DEFAULT_FANOUT = {"composition-1k": 5, "hatt": 5, "am-2k": 2}
SPLITS = ("train", "test")


class ManifestError(ValueError):
    pass


def _check_image(img, what):
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"{what} must be a (3, H, W) image, got {img.shape}")
    return img


def fit_background(bg, height, width):
    """Center-crop ``bg`` to (height, width), upscaling first if it is too small."""
    bg = _check_image(bg, "background")
    bh, bw = bg.shape[1:]
    if bh < height or bw < width:
        ratio = max(height / bh, width / bw)
        nh, nw = max(height, int(np.ceil(bh * ratio))), max(width, int(np.ceil(bw * ratio)))
        bg = T.resize_bilinear(bg[None], nh, nw)[0]
        bh, bw = nh, nw
    top = (bh - height) // 2
    left = (bw - width) // 2
    return np.ascontiguousarray(bg[:, top:top + height, left:left + width])


def composite(fg, alpha, bg):
    """I = alpha * F + (1 - alpha) * B per channel; ``bg`` is fitted to ``fg`` first."""
    fg = _check_image(fg, "foreground")
    a = np.asarray(alpha, dtype=np.float32)
    if a.shape != fg.shape[1:]:
        raise ValueError(f"alpha shape {a.shape} does not match foreground {fg.shape[1:]}")
    bg = fit_background(bg, *a.shape)
    return (a * fg + (1.0 - a) * bg).astype(np.float32)


def bokeh_augment(bg, sigma=DEFAULT_BOKEH_SIGMA):
    bg = _check_image(bg, "background")
    return T.gaussian_blur2d(bg[None], sigma)[0]


def _reflect_pad_to(x, size):
    """Center-pad the last two axes by reflection up to ``size``."""
    h, w = x.shape[-2:]
    ph, pw = max(0, size - h), max(0, size - w)
    if not ph and not pw:
        return x
    pad = [(0, 0)] * (x.ndim - 2) + [(ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)]
    return np.pad(x, pad, mode="symmetric")


def crop_offsets(height, width, crop, seed):
    rng = Rng(derive_seed(seed, "crop"))
    top = rng.randint(0, height - crop + 1)
    left = rng.randint(0, width - crop + 1)
    return top, left


def crop_resize_augment(image, alpha, crop, seed, out_size=TRAIN_SIZE):
    """Seeded square crop of side ``crop`` then bilinear resize to ``out_size``.

    Image and alpha get the same geometric transform. Sources smaller than
    the crop are reflection-padded around the center first.
    """
    image = _check_image(image, "image")
    alpha = np.asarray(alpha, dtype=np.float32)
    if alpha.shape != image.shape[1:]:
        raise ValueError(f"alpha shape {alpha.shape} does not match image {image.shape[1:]}")
    if crop < 1:
        raise ValueError("crop size must be >= 1")
    return _crop_resize_stack(image, alpha, crop, seed, out_size)


@dataclass
class ManifestEntry:
    id: str
    image: str
    alpha: str
    type: ImageType
    category: str
    split: str = "test"
    fg: str | None = None
    bg: str | None = None

    def resolve(self, root, field):
        value = getattr(self, field)
        return None if value is None else Path(root) / value

    def to_json(self):
        d = asdict(self)
        d["type"] = self.type.value
        return {k: v for k, v in d.items() if v is not None}


_REQUIRED = ("id", "image", "alpha", "category")
_KNOWN = set(_REQUIRED) | {"type", "split", "fg", "bg"}


def ingest_manifest(path, check_files=True):
    """Parse a JSON-lines manifest. Paths inside are relative to its directory.

    A missing ``type`` is filled in by classifying the alpha matte.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    root = path.parent
    entries = []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise ManifestError(f"{where}: expected a JSON object")
            missing = [k for k in _REQUIRED if k not in rec]
            if missing:
                raise ManifestError(f"{where}: missing field(s) {missing}")
            unknown = set(rec) - _KNOWN
            if unknown:
                raise ManifestError(f"{where}: unknown field(s) {sorted(unknown)}")
            eid = str(rec["id"])
            if eid in seen:
                raise ManifestError(f"{where}: duplicate id {eid!r}")
            seen.add(eid)
            try:
                category = normalize_category(rec["category"])
            except ValueError as exc:
                raise ManifestError(f"{where}: {exc}") from None
            split = rec.get("split", "test")
            if split not in SPLITS:
                raise ManifestError(f"{where}: bad split {split!r}")
            if check_files:
                for field in ("image", "alpha", "fg", "bg"):
                    if rec.get(field) is not None and not (root / rec[field]).is_file():
                        raise ManifestError(f"{where}: {field} file not found: {rec[field]}")
            if rec.get("type") is not None:
                try:
                    itype = ImageType.parse(rec["type"])
                except ValueError as exc:
                    raise ManifestError(f"{where}: {exc}") from None
            else:
                try:
                    itype = classify_type(read_alpha(root / rec["alpha"]))
                except (OSError, ValueError) as exc:
                    raise ManifestError(f"{where}: cannot classify type from alpha ({exc})") from None
            entries.append(ManifestEntry(eid, rec["image"], rec["alpha"], itype, category,
                                         split, rec.get("fg"), rec.get("bg")))
    return entries


def write_manifest(entries, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_json(), sort_keys=True) + "\n")


def dataset_stats(entries):
    """Counts per image type and per category (plus total)."""
    types = {t.value: 0 for t in ImageType}
    cats = {c: 0 for c in CATEGORIES + ("other",)}
    for e in entries:
        types[e.type.value] += 1
        cats[e.category] += 1
    return {"total": len(entries), "type": types, "category": cats}


@dataclass(frozen=True)
class CompositeSpec:
    fg_id: str
    bg_id: str
    fg_type: ImageType
    bokeh_sigma: float | None
    crop: int | None
    flip: bool
    seed: int

    def __post_init__(self):
        if self.crop is not None and self.crop not in CROP_SIZES:
            raise ValueError(f"crop size {self.crop} not in {CROP_SIZES}")
        if self.bokeh_sigma is not None and self.fg_type is not ImageType.NS:
            raise ValueError("background blur is only applied to NS foregrounds")

    @property
    def out_id(self):
        return f"{self.fg_id}__{self.bg_id}"


def plan_composites(fg_entries, bg_ids, fanout=5, seed=0, augment=False,
                    bokeh_sigma=DEFAULT_BOKEH_SIGMA):
    """One CompositeSpec per (foreground, chosen background) pair.

    Each foreground gets ``fanout`` distinct backgrounds (all of them if
    fewer exist), chosen by a seeded shuffle.
    """
    if fanout < 1:
        raise ValueError("fanout must be >= 1")
    bg_ids = sorted(bg_ids)
    if not bg_ids:
        raise ValueError("no background images")
    specs = []
    for e in sorted(fg_entries, key=lambda e: e.id):
        rng = Rng(derive_seed(seed, f"bg:{e.id}"))
        order = rng.permutation(len(bg_ids))[:fanout]
        for k in sorted(order):
            bg = bg_ids[k]
            s = derive_seed(seed, f"{e.id}:{bg}")
            flip = augment and Rng(s).randint(0, 2) == 1
            crop = CROP_SIZES[Rng(s ^ 1).randint(0, len(CROP_SIZES))] if augment else None
            specs.append(CompositeSpec(e.id, bg, e.type,
                                       bokeh_sigma if e.type is ImageType.NS else None,
                                       crop, flip, s))
    return specs


def render_composite(spec, fg, alpha, bg):
    """Build (image, alpha, fg, bg) arrays for one CompositeSpec."""
    fg = _check_image(fg, "foreground")
    alpha = np.asarray(alpha, dtype=np.float32)
    bg = fit_background(bg, *alpha.shape)
    if spec.flip:
        fg = fg[:, :, ::-1]
        alpha = alpha[:, ::-1]
    if spec.bokeh_sigma is not None:
        bg = bokeh_augment(bg, spec.bokeh_sigma)
    image = composite(fg, alpha, bg)
    if spec.crop is not None:
        stacked = np.concatenate([image, fg, bg], axis=0)
        out, a_out = _crop_resize_stack(stacked, alpha, spec.crop, spec.seed)
        return out[:3], a_out, out[3:6], out[6:]
    return image, np.ascontiguousarray(alpha), np.ascontiguousarray(fg), bg


def _crop_resize_stack(stack, alpha, crop, seed, out_size=TRAIN_SIZE):
    stack = _reflect_pad_to(stack, crop)
    alpha = _reflect_pad_to(alpha, crop)
    h, w = alpha.shape
    top, left = crop_offsets(h, w, crop, seed)
    s = T.resize_bilinear(stack[None, :, top:top + crop, left:left + crop], out_size, out_size)[0]
    a = T.resize_bilinear(alpha[None, None, top:top + crop, left:left + crop], out_size, out_size)[0, 0]
    return s, np.clip(a, 0.0, 1.0)
