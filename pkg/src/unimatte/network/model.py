"""Forward inference for the matting network."""
from dataclasses import dataclass, field
import math

import numpy as np

from .. import tensor as T
from ..losses import fuse
from ..semantics import classes_to_rep
from .spec import build_network, layer_index

_SPEC_CACHE = {}


def _default_spec():
    if "spec" not in _SPEC_CACHE:
        spec = build_network()
        _SPEC_CACHE["spec"] = (spec, layer_index(spec))
    return _SPEC_CACHE["spec"]


@dataclass
class NetworkOutputs:
    semantic_logits: np.ndarray    # (n, 3, H, W)
    semantic_probs: np.ndarray     # (n, 3, H, W), sums to 1 per pixel
    unified_pred: np.ndarray       # (n, 1, H, W) in {0, 0.5, 1}
    matting_raw: np.ndarray        # (n, 1, H, W) in [0, 1]
    spatial_attention: np.ndarray  # (n, 1, H, W) in [0, 1]
    fused_alpha: np.ndarray        # (n, 1, H, W) in [0, 1]
    activations: dict = field(default_factory=dict)


def _conv(store, c, x):
    y = T.conv2d(x, store[f"{c.name}.weight"],
                 store[f"{c.name}.bias"] if c.bias else None,
                 c.stride, c.padding, c.dilation)
    if c.bn:
        p = c.name + ".bn."
        y = T.batchnorm_infer(y, store[p + "mean"], store[p + "var"],
                              store[p + "gamma"], store[p + "beta"])
    if c.relu:
        y = T.relu(y)
    return y


def _resnet(store, layer, x):
    convs = {c.name: c for c in layer.convs}
    b = 0
    while f"{layer.name}.{b}.conv1" in convs:
        pre = f"{layer.name}.{b}."
        y = _conv(store, convs[pre + "conv1"], x)
        y = _conv(store, convs[pre + "conv2"], y)
        sc = _conv(store, convs[pre + "down"], x) if pre + "down" in convs else x
        x = T.relu(y + sc)
        b += 1
    return x


def _ppm(store, layer, x):
    h, w = x.shape[2:]
    branches = [x]
    for b, c in zip(layer.hyper["bins"], layer.convs):
        # tiny inputs: a bin larger than the map degenerates to per-pixel pooling
        pooled = T.adaptive_avgpool(x, min(b, h), min(b, w))
        branches.append(T.resize_bilinear(_conv(store, c, pooled), h, w))
    return _conv(store, layer.convs[-1], T.concat_channels(branches))


def _decoder(store, layer, x):
    for c in layer.convs:
        if not c.name.endswith(".psp"):
            x = _conv(store, c, x)
    if layer.hyper.get("upsample"):
        x = T.upsample2x(x, "bilinear")
    return x


def _psp_projection(store, layer, ppm, size):
    c = next(c for c in layer.convs if c.name.endswith(".psp"))
    return T.resize_bilinear(_conv(store, c, ppm), *size)


def se_gate(store, name, x):
    """Channel gate s in (0, 1)^c from global average pooling."""
    n, c = x.shape[:2]
    pooled = T.adaptive_avgpool(x, 1, 1).reshape(n, c)
    hidden = T.relu(T.linear(pooled, store[f"{name}.fc1.weight"], store[f"{name}.fc1.bias"]))
    return T.sigmoid(T.linear(hidden, store[f"{name}.fc2.weight"], store[f"{name}.fc2.bias"]))


def apply_channel_gate(x, gate):
    return (x * gate[:, :, None, None]).astype(np.float32)


def spatial_attention(store, x):
    """Sigmoid map from channel-wise max and mean of ``x``."""
    pooled = np.concatenate([x.max(axis=1, keepdims=True), x.mean(axis=1, keepdims=True)], axis=1)
    return T.sigmoid(T.conv2d(pooled, store["SPA.conv.weight"], store["SPA.conv.bias"], 1, 3))


def spatial_residual(features, attention):
    """features + attention * features (attention broadcast over channels)."""
    return (features + attention * features).astype(np.float32)


def check_input(image):
    x = T.as_tensor(image)
    if x.shape[1] != 3:
        raise ValueError(f"network input must have 3 channels, got {x.shape[1]}")
    h, w = x.shape[2:]
    if h % 32 or w % 32:
        raise ValueError(f"input spatial size {h}x{w} must be divisible by 32")
    return x


def forward(store, image, spec=None, keep_activations=False):
    """Run the network on an (n, 3, H, W) image batch, H and W multiples of 32."""
    if spec is None:
        spec, idx = _default_spec()
    else:
        idx = layer_index(spec)
    x = check_input(image)
    act = {}
    pool_idx = {}

    def pool(name, src):
        v, i = T.maxpool2d_indexed(src, 3, 2, 1)
        pool_idx[name] = (i, src.shape[2:])
        act[name] = v
        return v

    # encoder
    e0 = act["E0"] = _conv(store, idx["E0"].convs[0], x)
    m0 = pool("M0", e0)
    m1 = pool("M1", m0)
    e1 = act["E1"] = _resnet(store, idx["E1"], m1)
    m2 = pool("M2", e1)
    e2 = act["E2"] = _resnet(store, idx["E2"], m2)
    m3 = pool("M3", e2)
    e3 = act["E3"] = _resnet(store, idx["E3"], m3)
    m4 = pool("M4", e3)
    e4 = act["E4"] = _resnet(store, idx["E4"], m4)

    # semantic decoder
    ppm = act["PPM"] = _ppm(store, idx["PPM"], e4)
    d = act["SD_4"] = _decoder(store, idx["SD_4"], T.concat_channels([ppm, e4]))
    d = act["SE_4"] = apply_channel_gate(d, se_gate(store, "SE_4", d))
    for k in (3, 2, 1, 0):
        name = f"SD_{k}"
        psp = _psp_projection(store, idx[name], ppm, d.shape[2:])
        d = act[name] = _decoder(store, idx[name], T.concat_channels([d, psp]))
        if k == 0:
            spa = act["SPA"] = spatial_attention(store, d)
        d = act[f"SE_{k}"] = apply_channel_gate(d, se_gate(store, f"SE_{k}", d))
    logits = act["SD-final"] = _conv(store, idx["SD-final"].convs[0], d)
    probs = T.softmax_channel(logits)
    unified = classes_to_rep(np.argmax(probs, axis=1))[:, None].astype(np.float32)

    # matting decoder
    m = act["MD_5"] = _decoder(store, idx["MD_5"], e4)
    m = act["MD_4"] = _decoder(store, idx["MD_4"], T.concat_channels([m, e4]))
    skips = {3: e3, 2: e2, 1: e1}
    for k in (4, 3, 2):
        i, size = pool_idx[f"M{k}"]
        m = act[f"MU_{k}"] = T.max_unpool2d(m, i, 2, 2, size)
        m = act[f"MD_{k - 1}"] = _decoder(store, idx[f"MD_{k - 1}"],
                                          T.concat_channels([m, skips[k - 1]]))
    for k in (1, 0):
        i, size = pool_idx[f"M{k}"]
        m = act[f"MU_{k}"] = T.max_unpool2d(m, i, 2, 2, size)
    m = act["MD_0"] = _decoder(store, idx["MD_0"], T.concat_channels([m, e0]))
    m = act["SPAR"] = spatial_residual(m, spa)
    raw = T.sigmoid(_conv(store, idx["MD-final"].convs[0], m))
    act["MD-final"] = raw
    fused = np.clip(fuse(unified, raw), 0.0, 1.0).astype(np.float32)
    act["MF"] = fused
    return NetworkOutputs(logits, probs, unified, raw, spa, fused,
                          act if keep_activations else {})


def scaled_size(size, scale, multiple=32):
    """Round ``size * scale`` to the nearest multiple of ``multiple``."""
    return int(math.floor(size * scale / multiple + 0.5)) * multiple


@dataclass
class HybridResult:
    alpha: np.ndarray              # (H, W)
    unified: np.ndarray            # (H, W) in {0, 0.5, 1}
    matting_raw: np.ndarray        # (H, W)
    spatial_attention: np.ndarray  # (H, W)
    sizes: tuple


def hybrid_inference(store, image, scales=(1 / 3, 1 / 4), spec=None):
    """Two-scale inference on one (3, H, W) or (1, 3, H, W) image.

    The coarser scale supplies the semantic map, the finer one the matting
    detail. Class probabilities (not the decoded map) are resized to full
    resolution before decoding, so the unified map stays in {0, 0.5, 1}.
    """
    img = np.asarray(image, dtype=np.float32)
    if img.ndim == 3:
        img = img[None]
    x = T.as_tensor(img)
    if x.shape[0] != 1:
        raise ValueError("hybrid_inference takes a single image")
    h, w = x.shape[2:]
    fine_s, coarse_s = max(scales), min(scales)
    if not all(0 < s <= 1 for s in scales):
        raise ValueError(f"scale factors must be in (0, 1], got {scales}")
    runs = {}
    sizes = []
    for s in (coarse_s, fine_s):
        sh, sw = scaled_size(h, s), scaled_size(w, s)
        if sh < 32 or sw < 32:
            raise ValueError(f"image {h}x{w} too small for scale {s:.4g} (needs >= 32 px after scaling)")
        sizes.append((sh, sw))
        if (sh, sw) not in runs:
            runs[(sh, sw)] = forward(store, T.resize_bilinear(x, sh, sw), spec)
    coarse = runs[sizes[0]]
    fine = runs[sizes[1]]
    probs = T.resize_bilinear(coarse.semantic_probs, h, w)
    unified = classes_to_rep(np.argmax(probs, axis=1))[0]
    raw = np.clip(T.resize_bilinear(fine.matting_raw, h, w)[0, 0], 0.0, 1.0)
    att = np.clip(T.resize_bilinear(fine.spatial_attention, h, w)[0, 0], 0.0, 1.0)
    alpha = np.clip(fuse(unified, raw), 0.0, 1.0).astype(np.float32)
    return HybridResult(alpha, unified, raw, att, tuple(sizes))
