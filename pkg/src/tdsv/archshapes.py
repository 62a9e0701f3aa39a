"""Output-size calculators for the TDNN and Thin ResNet34 front-ends.

No weights, no forward pass: each layer maps an input shape to an output
shape, and the report pairs the numeric shape with the symbolic form used in
the architecture tables (``"512 × T"``, ``"65 × T/4 × 16"``, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field

N_CHARS = 29
LC_UNITS = 20


@dataclass(frozen=True)
class LayerShapeSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ShapeRow:
    name: str
    dims: tuple
    symbolic: str


@dataclass(frozen=True)
class ShapeReport:
    rows: tuple

    def __post_init__(self):
        for row in self.rows:
            if any(d <= 0 for d in row.dims):
                raise ValueError(f"{row.name}: non-positive dimension {row.dims}")

    def __getitem__(self, name: str) -> ShapeRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def names(self) -> list:
        return [r.name for r in self.rows]

    def as_table(self) -> str:
        width = max(len(r.name) for r in self.rows)
        return "\n".join(
            f"{r.name:<{width}}  {r.symbolic:<22}  {' x '.join(map(str, r.dims))}" for r in self.rows
        )

    def as_key_values(self) -> str:
        return "\n".join(f"{r.name}={'x'.join(map(str, r.dims))}" for r in self.rows)


def conv_out(size: int, kernel: int, stride: int = 1, pad: int = 0, dilation: int = 1) -> int:
    return (size + 2 * pad - dilation * (kernel - 1) - 1) // stride + 1


# (name, units for the CLP embedding net, units for the phrase classifier,
#  kernel, dilation, stride)
_TDNN_FRAMES = (
    ("Frame1", 512, 1536, 5, 1, 2),
    ("Frame2", 512, 512, 3, 2, 1),
    ("Frame3", 512, 512, 3, 3, 1),
    ("Frame4", 512, 256, 1, 1, 1),
    ("Frame5", 1536, 256, 1, 1, 1),
)

TDNN_VARIANTS = ("clp_embedding", "phrase_classifier")


def tdnn_layers(variant: str) -> list[LayerShapeSpec]:
    col = TDNN_VARIANTS.index(variant) + 1
    layers = [
        LayerShapeSpec(spec[0], "tdnn_frame",
                       {"units": spec[col], "kernel": spec[3], "dilation": spec[4], "stride": spec[5]})
        for spec in _TDNN_FRAMES
    ]
    layers += [
        LayerShapeSpec("Pooling", "pooling", {"chars": N_CHARS}),
        LayerShapeSpec("Segment1", "locally_connected", {"units": LC_UNITS, "chars": N_CHARS}),
        LayerShapeSpec("Segment2", "fully_connected", {"units": 512}),
        LayerShapeSpec("Softmax", "fully_connected", {"units": None}),
    ]
    return layers


def tdnn_shapes(T: int, variant: str = "clp_embedding", n_classes: int | None = None) -> ShapeReport:
    """Shapes for the TDNN front-end with character-level pooling.

    Frame-axis lengths are computed without padding, so Frame1 (5-frame
    context, stride 2) roughly halves T and the dilated layers trim a few
    frames.  The symbolic column keeps the table's notation, where T stands
    for the segment length at that layer.

    Args:
      T: number of input frames.
      variant: ``"clp_embedding"`` (softmax over N speakers) or
        ``"phrase_classifier"`` (softmax over M phrases).
      n_classes: N or M; defaults to 10 phrases for the phrase classifier.

    Raises:
      ValueError: T is too short for the receptive field.
    """
    if variant not in TDNN_VARIANTS:
        raise ValueError(f"unknown TDNN variant {variant!r}")
    if n_classes is None:
        if variant == "clp_embedding":
            raise ValueError("clp_embedding needs the number of speakers")
        n_classes = 10
    rows = [ShapeRow("Input", (64, T), "64 × T")]
    t = T
    width = 64
    for layer in tdnn_layers(variant):
        p = layer.params
        if layer.kind == "tdnn_frame":
            t = conv_out(t, p["kernel"], p["stride"], 0, p["dilation"])
            if t < 1:
                raise ValueError(f"T={T} frames is too short for the TDNN receptive field")
            width = p["units"]
            rows.append(ShapeRow(layer.name, (width, t), f"{width} × T"))
        elif layer.kind == "pooling":
            rows.append(ShapeRow(layer.name, (width, N_CHARS, 1), f"({width} × {N_CHARS}) × 1"))
        elif layer.kind == "locally_connected":
            rows.append(ShapeRow(layer.name, (LC_UNITS, N_CHARS, 1), f"({LC_UNITS} × {N_CHARS}) × 1"))
        elif p["units"] is not None:
            rows.append(ShapeRow(layer.name, (p["units"], 1), f"{p['units']} × 1"))
        else:
            symbol = "N" if variant == "clp_embedding" else "M"
            rows.append(ShapeRow(layer.name, (n_classes, 1), f"{symbol} × 1"))
    return ShapeReport(tuple(rows))


def resnet_layers() -> list[LayerShapeSpec]:
    # The 7x7 stem must pad 3 to give 257 -> 129; the 9x1 FC pads 0 to give
    # a height of 1.  All 3x3 layers pad 1.
    return [
        LayerShapeSpec("Conv1", "conv2d", {"kernel": 7, "stride": 2, "pad": 3, "channels": 16}),
        LayerShapeSpec("Conv1-pool", "maxpool2d", {"kernel": 3, "stride": 2, "pad": 1, "channels": 16}),
        LayerShapeSpec("Conv2", "residual_stack", {"kernel": 3, "stride": 1, "pad": 1, "channels": 16, "repeat": 3}),
        LayerShapeSpec("Conv3", "residual_stack", {"kernel": 3, "stride": 2, "pad": 1, "channels": 32, "repeat": 4}),
        LayerShapeSpec("Conv4", "residual_stack", {"kernel": 3, "stride": 2, "pad": 1, "channels": 64, "repeat": 6}),
        LayerShapeSpec("Conv5", "residual_stack", {"kernel": 3, "stride": 2, "pad": 1, "channels": 128, "repeat": 3}),
        LayerShapeSpec("FC", "conv2d", {"kernel": (9, 1), "stride": 1, "pad": 0, "channels": 512}),
    ]


_RESNET_SYMBOLIC = {
    "Conv1": "129 × T/2 × 16",
    "Conv1-pool": "65 × T/4 × 16",
    "Conv2": "65 × T/4 × 16",
    "Conv3": "33 × T/8 × 32",
    "Conv4": "17 × T/16 × 64",
    "Conv5": "9 × T/32 × 128",
    "FC": "1 × T/32 × 512",
}


def resnet_shapes(T: int) -> ShapeReport:
    """Shapes (frequency x time x channels) for Thin ResNet34 on 257-bin STFT input.

    Strided layers use ``floor((size + 2 pad - kernel) / stride) + 1``; within
    a residual stack only the first convolution is strided.
    """
    if T < 32:
        raise ValueError(f"T={T} is below the total time stride of 32")
    f, t = 257, T
    rows = [ShapeRow("Input", (f, t, 1), "257 × T × 1")]
    for layer in resnet_layers():
        p = layer.params
        kf, kt = p["kernel"] if isinstance(p["kernel"], tuple) else (p["kernel"], p["kernel"])
        f = conv_out(f, kf, p["stride"], p["pad"])
        t = conv_out(t, kt, p["stride"], p["pad"])
        rows.append(ShapeRow(layer.name, (f, t, p["channels"]), _RESNET_SYMBOLIC[layer.name]))
    return ShapeReport(tuple(rows))
