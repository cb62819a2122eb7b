"""8-bit PNG I/O.

RGB images are held as (3, H, W) float32 in [0, 1]; alphas as (H, W).
Unified maps / trimaps use the codes 0, 128, 255 for 0, 0.5, 1.
"""
from pathlib import Path

import numpy as np
from PIL import Image

REP_CODES = {0.0: 0, 0.5: 128, 1.0: 255}


def _to_u8(a):
    return np.clip(np.floor(np.asarray(a, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _save(arr, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG", optimize=False)


def read_rgb(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def write_rgb(path, img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected (3, H, W) image, got {img.shape}")
    _save(np.ascontiguousarray(_to_u8(img).transpose(1, 2, 0)), path)


def read_alpha(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float32) / 255.0


def write_alpha(path, alpha):
    alpha = np.asarray(alpha)
    if alpha.ndim != 2:
        raise ValueError(f"expected (H, W) alpha, got {alpha.shape}")
    _save(_to_u8(alpha), path)


def encode_rep(u):
    u = np.asarray(u, dtype=np.float32)
    out = np.empty(u.shape, dtype=np.uint8)
    seen = np.zeros(u.shape, dtype=bool)
    for value, code in REP_CODES.items():
        m = u == value
        out[m] = code
        seen |= m
    if not seen.all():
        raise ValueError("unified map values must be in {0, 0.5, 1}")
    return out


def decode_rep(codes):
    codes = np.asarray(codes, dtype=np.uint8)
    out = np.empty(codes.shape, dtype=np.float32)
    seen = np.zeros(codes.shape, dtype=bool)
    for value, code in REP_CODES.items():
        m = codes == code
        out[m] = value
        seen |= m
    if not seen.all():
        bad = int(codes[~seen][0])
        raise ValueError(f"pixel code {bad} is not one of 0/128/255")
    return out


def write_rep(path, u):
    _save(encode_rep(u), path)


def read_rep(path):
    with Image.open(path) as im:
        return decode_rep(np.asarray(im.convert("L")))
