"""Layer table of the matting network and its parameter manifest.

One ``LayerSpec`` per row of the architecture table, in table order.
Shapes are stated for a 320x320 input; ``LayerSpec.output_shape`` scales
them for any input whose sides are multiples of 32.

Concatenation table (input channels of the first conv in each block):

    ===========  ===============================  ========
    block        concatenated inputs              channels
    ===========  ===============================  ========
    SD_4         PPM (512) + E4 (512)             1024
    SD_3         SE_4 (256) + PPM->20 (256)       512
    SD_2         SE_3 (128) + PPM->40 (128)       256
    SD_1         SE_2 (64)  + PPM->80 (64)        128
    SD_0         SE_1 (64)  + PPM->160 (64)       128
    MD_5         E4 (512)                         512
    MD_4         MD_5 (512) + E4 (512)            1024
    MD_3         MU_4 (256) + E3 (256)            512
    MD_2         MU_3 (128) + E2 (128)            256
    MD_1         MU_2 (64)  + E1 (64)             128
    MD_0         MU_0 (64)  + E0 (64)             128
    ===========  ===============================  ========

"PPM->s" is the PPM output projected by a 3x3 conv to the block width and
bilinearly upsampled to side s; those projections are owned by the
consuming SD block.
"""
from dataclasses import dataclass, field

INPUT_SIZE = 320
SE_REDUCTION = 16
PPM_BINS = (1, 3, 5)
PPM_BRANCH_CHANNELS = 128


@dataclass(frozen=True)
class ConvSpec:
    name: str
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    bias: bool = True
    bn: bool = True
    relu: bool = True

    def params(self):
        out = {f"{self.name}.weight": (self.out_ch, self.in_ch, self.kernel, self.kernel)}
        if self.bias:
            out[f"{self.name}.bias"] = (self.out_ch,)
        if self.bn:
            for p in ("gamma", "beta", "mean", "var"):
                out[f"{self.name}.bn.{p}"] = (self.out_ch,)
        return out

    def macs(self, out_h, out_w):
        return self.out_ch * self.in_ch * self.kernel * self.kernel * out_h * out_w


@dataclass(frozen=True)
class LinearSpec:
    name: str
    in_features: int
    out_features: int

    def params(self):
        return {
            f"{self.name}.weight": (self.out_features, self.in_features),
            f"{self.name}.bias": (self.out_features,),
        }

    def macs(self):
        return self.in_features * self.out_features


@dataclass(frozen=True)
class LayerSpec:
    """One row of the architecture table.

    ``stride`` is the downsampling factor of the output relative to the
    network input, so the 320x320 output side is ``320 // stride``.
    ``conv_stride`` maps each conv to the downsampling factor at which it
    runs (convs inside a block may run before its final upsample).
    """
    name: str
    kind: str
    out_channels: int
    stride: int
    inputs: tuple = ()
    convs: tuple = ()
    linears: tuple = ()
    conv_stride: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)

    def output_shape(self, n=1, size=INPUT_SIZE):
        if isinstance(size, int):
            size = (size, size)
        return (n, self.out_channels, size[0] // self.stride, size[1] // self.stride)

    def params(self):
        out = {}
        for c in self.convs:
            out.update(c.params())
        for lin in self.linears:
            out.update(lin.params())
        return out

    def macs(self, size=INPUT_SIZE):
        if isinstance(size, int):
            size = (size, size)
        total = 0
        for c in self.convs:
            s = self.conv_stride.get(c.name, self.stride)
            total += c.macs(size[0] // s, size[1] // s)
        for lin in self.linears:
            total += lin.macs()
        return total


def _conv3(name, cin, cout, **kw):
    kw.setdefault("padding", 1)
    return ConvSpec(name, cin, cout, 3, **kw)


def _resnet_layer(name, cin, cout, blocks):
    convs = []
    for b in range(blocks):
        bin_ = cin if b == 0 else cout
        convs.append(_conv3(f"{name}.{b}.conv1", bin_, cout, bias=False))
        convs.append(_conv3(f"{name}.{b}.conv2", cout, cout, bias=False, relu=False))
        if bin_ != cout:
            convs.append(ConvSpec(f"{name}.{b}.down", bin_, cout, 1, bias=False, relu=False))
    return tuple(convs)


def _decoder_block(name, cin, widths, stride, inputs, upsample, psp_ch=0, psp_from=10):
    """Three (or two) 3x3 conv+BN+ReLU; optional trailing 2x upsample."""
    convs = []
    conv_stride = {}
    prev = cin
    for i, wdt in enumerate(widths):
        c = _conv3(f"{name}.conv{i}", prev, wdt)
        convs.append(c)
        conv_stride[c.name] = stride * 2 if upsample else stride
        prev = wdt
    if psp_ch:
        c = _conv3(f"{name}.psp", 512, psp_ch)
        convs.append(c)
        conv_stride[c.name] = INPUT_SIZE // psp_from
    return LayerSpec(name, "decoder", widths[-1], stride, inputs=inputs, convs=tuple(convs),
                     conv_stride=conv_stride, hyper={"upsample": upsample, "psp_channels": psp_ch})


def _se(name, ch, stride, inputs):
    mid = ch // SE_REDUCTION
    return LayerSpec(name, "se", ch, stride, inputs=inputs,
                     linears=(LinearSpec(f"{name}.fc1", ch, mid), LinearSpec(f"{name}.fc2", mid, ch)),
                     hyper={"reduction": SE_REDUCTION})


def _pool(name, ch, stride, inputs):
    return LayerSpec(name, "maxpool", ch, stride, inputs=inputs,
                     hyper={"kernel": 3, "stride": 2, "padding": 1})


def _unpool(name, ch, stride, inputs):
    return LayerSpec(name, "unpool", ch, stride, inputs=inputs, hyper={"kernel": 2, "stride": 2})


def build_network():
    """Ordered layer table with wiring; see module docstring for concatenations."""
    L = []
    # encoder
    L.append(LayerSpec("E0", "conv", 64, 1, inputs=("input",),
                       convs=(ConvSpec("E0.conv", 3, 64, 7, padding=3, bias=False),)))
    L.append(_pool("M0", 64, 2, ("E0",)))
    L.append(_pool("M1", 64, 4, ("M0",)))
    L.append(LayerSpec("E1", "resnet", 64, 4, inputs=("M1",), convs=_resnet_layer("E1", 64, 64, 3)))
    L.append(_pool("M2", 64, 8, ("E1",)))
    L.append(LayerSpec("E2", "resnet", 128, 8, inputs=("M2",), convs=_resnet_layer("E2", 64, 128, 4)))
    L.append(_pool("M3", 128, 16, ("E2",)))
    L.append(LayerSpec("E3", "resnet", 256, 16, inputs=("M3",), convs=_resnet_layer("E3", 128, 256, 6)))
    L.append(_pool("M4", 256, 32, ("E3",)))
    L.append(LayerSpec("E4", "resnet", 512, 32, inputs=("M4",), convs=_resnet_layer("E4", 256, 512, 3)))

    # semantic decoder
    ppm_convs = tuple(ConvSpec(f"PPM.branch{b}", 512, PPM_BRANCH_CHANNELS, 1, bias=False)
                      for b in PPM_BINS)
    ppm_convs += (_conv3("PPM.fuse", 512 + PPM_BRANCH_CHANNELS * len(PPM_BINS), 512),)
    L.append(LayerSpec("PPM", "ppm", 512, 32, inputs=("E4",), convs=ppm_convs,
                       hyper={"bins": PPM_BINS}))
    L.append(_decoder_block("SD_4", 1024, (512, 512, 256), 16, ("PPM", "E4"), True))
    L.append(_se("SE_4", 256, 16, ("SD_4",)))
    L.append(_decoder_block("SD_3", 512, (256, 256, 128), 8, ("SE_4", "PPM"), True, psp_ch=256))
    L.append(_se("SE_3", 128, 8, ("SD_3",)))
    L.append(_decoder_block("SD_2", 256, (128, 128, 64), 4, ("SE_3", "PPM"), True, psp_ch=128))
    L.append(_se("SE_2", 64, 4, ("SD_2",)))
    L.append(_decoder_block("SD_1", 128, (64, 64, 64), 2, ("SE_2", "PPM"), True, psp_ch=64))
    L.append(_se("SE_1", 64, 2, ("SD_1",)))
    L.append(_decoder_block("SD_0", 128, (64, 64), 1, ("SE_1", "PPM"), True, psp_ch=64))
    L.append(LayerSpec("SPA", "spatial_attention", 1, 1, inputs=("SD_0",),
                       convs=(ConvSpec("SPA.conv", 2, 1, 7, padding=3, bn=False, relu=False),)))
    L.append(_se("SE_0", 64, 1, ("SD_0",)))
    L.append(LayerSpec("SD-final", "head", 3, 1, inputs=("SE_0",),
                       convs=(_conv3("SD-final.conv", 64, 3, bn=False, relu=False),)))

    # matting decoder
    md5 = tuple(_conv3(f"MD_5.conv{i}", 512, 512, padding=2, dilation=2) for i in range(3))
    L.append(LayerSpec("MD_5", "decoder", 512, 32, inputs=("E4",), convs=md5,
                       hyper={"upsample": False}))
    L.append(_decoder_block("MD_4", 1024, (512, 512, 256), 32, ("MD_5", "E4"), False))
    L.append(_unpool("MU_4", 256, 16, ("MD_4", "M4")))
    L.append(_decoder_block("MD_3", 512, (256, 256, 128), 16, ("MU_4", "E3"), False))
    L.append(_unpool("MU_3", 128, 8, ("MD_3", "M3")))
    L.append(_decoder_block("MD_2", 256, (128, 128, 64), 8, ("MU_3", "E2"), False))
    L.append(_unpool("MU_2", 64, 4, ("MD_2", "M2")))
    L.append(_decoder_block("MD_1", 128, (64, 64, 64), 4, ("MU_2", "E1"), False))
    L.append(_unpool("MU_1", 64, 2, ("MD_1", "M1")))
    L.append(_unpool("MU_0", 64, 1, ("MU_1", "M0")))
    L.append(_decoder_block("MD_0", 128, (64, 64), 1, ("MU_0", "E0"), False))
    L.append(LayerSpec("SPAR", "spatial_residual", 64, 1, inputs=("MD_0", "SPA")))
    L.append(LayerSpec("MD-final", "head", 1, 1, inputs=("SPAR",),
                       convs=(_conv3("MD-final.conv", 64, 1, bn=False, relu=False),)))
    L.append(LayerSpec("MF", "fusion", 1, 1, inputs=("SD-final", "MD-final")))
    return L


def layer_index(spec):
    return {layer.name: layer for layer in spec}


def param_shapes(spec):
    """Ordered mapping of every parameter tensor name to its shape."""
    out = {}
    for layer in spec:
        out.update(layer.params())
    return out
