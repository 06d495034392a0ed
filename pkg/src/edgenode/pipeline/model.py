"""Reduced YOLO-style detector graph with an integer-only forward pass.

The graph is a flat list of layers; each layer names its inputs by index
(``-1`` is the network input). Heads are 1x1 convs emitting, per anchor,
``(tx, ty, tw, th, obj, cls)`` logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .image import RgbImage
from .quant import (
    Granularity,
    QuantizedTensor,
    QuantParams,
    calibrate,
    conv2d_int8,
    dequantize,
    quantize,
    quantize_bias,
    requantize_tensor,
)

LAYER_KINDS = ("conv", "dwconv", "maxpool", "upsample", "concat", "head")
OUTPUTS_PER_ANCHOR = 6  # tx, ty, tw, th, obj, cls (single class)
INPUT_SCALE = 1.0 / 127  # pixel / 255 in [0, 1] maps onto codes [0, 127]


class ModelError(ValueError):
    pass


@dataclass
class Layer:
    kind: str
    name: str
    inputs: tuple[int, ...]
    out_c: int
    kernel: int = 1
    stride: int = 1
    pad: int = 0
    relu: bool = False
    weights: QuantizedTensor | None = None
    bias: np.ndarray | None = None  # int32, accumulator scale
    out_scale: float = 1.0
    anchors: np.ndarray | None = None  # (A, 2) pixels, heads only

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ModelError(f"{self.name}: unknown layer kind {self.kind!r}")
        self.inputs = tuple(int(i) for i in self.inputs)

    @property
    def has_weights(self) -> bool:
        return self.kind in ("conv", "dwconv", "head")

    def param_count(self) -> int:
        if not self.has_weights or self.weights is None:
            return 0
        n = int(self.weights.data.size)
        if self.bias is not None:
            n += int(self.bias.size)
        return n


@dataclass
class MicroModel:
    input_side: int
    layers: list[Layer]
    input_scale: float = INPUT_SCALE
    _shapes: list[tuple[int, int, int]] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._shapes = None
        self.shapes()

    def shapes(self) -> list[tuple[int, int, int]]:
        """Output (C, H, W) of every layer; validates that shapes chain."""
        if self._shapes is not None:
            return self._shapes
        shapes: list[tuple[int, int, int]] = []
        src = (3, self.input_side, self.input_side)

        def get(i: int, at: int) -> tuple[int, int, int]:
            if i == -1:
                return src
            if not 0 <= i < at:
                raise ModelError(f"layer {at} references invalid input {i}")
            return shapes[i]

        for idx, layer in enumerate(self.layers):
            ins = [get(i, idx) for i in layer.inputs]
            shapes.append(_layer_out_shape(layer, ins))
        self._shapes = shapes
        return shapes

    def input_shapes(self, idx: int) -> list[tuple[int, int, int]]:
        src = (3, self.input_side, self.input_side)
        shapes = self.shapes()
        return [src if i == -1 else shapes[i] for i in self.layers[idx].inputs]

    @property
    def head_indices(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if l.kind == "head"]

    def head_strides(self) -> list[int]:
        shapes = self.shapes()
        return [self.input_side // shapes[i][1] for i in self.head_indices]

    def param_count(self) -> int:
        return sum(l.param_count() for l in self.layers)

    def mac_count(self) -> int:
        total = 0
        for idx, layer in enumerate(self.layers):
            total += layer_macs(layer, self.input_shapes(idx), self.shapes()[idx])
        return total

    def with_input_side(self, side: int) -> "MicroModel":
        """Same weights at another input resolution; anchors scale with the side."""
        layers = []
        for l in self.layers:
            anchors = None if l.anchors is None else l.anchors * (side / self.input_side)
            layers.append(replace(l, anchors=anchors))
        return MicroModel(side, layers, self.input_scale)


def _layer_out_shape(layer: Layer, ins: list[tuple[int, int, int]]) -> tuple[int, int, int]:
    k, s, p = layer.kernel, layer.stride, layer.pad
    if layer.kind == "concat":
        if len(ins) < 2 or len({(h, w) for _, h, w in ins}) != 1:
            raise ModelError(f"{layer.name}: concat inputs must share spatial size, got {ins}")
        c = sum(ci for ci, _, _ in ins)
        if c != layer.out_c:
            raise ModelError(f"{layer.name}: concat out_c {layer.out_c} != {c}")
        return (c, ins[0][1], ins[0][2])
    if len(ins) != 1:
        raise ModelError(f"{layer.name}: expected one input, got {len(ins)}")
    c, h, w = ins[0]
    if layer.kind == "upsample":
        if layer.out_c != c:
            raise ModelError(f"{layer.name}: upsample keeps channel count")
        return (c, h * s, w * s)
    oh = (h + 2 * p - k) // s + 1
    ow = (w + 2 * p - k) // s + 1
    if oh <= 0 or ow <= 0:
        raise ModelError(f"{layer.name}: kernel {k} stride {s} too large for {h}x{w}")
    if layer.kind in ("dwconv", "maxpool") and layer.out_c != c:
        raise ModelError(f"{layer.name}: {layer.kind} keeps channel count")
    if layer.has_weights and layer.weights is not None:
        icg = 1 if layer.kind == "dwconv" else c
        expect = (layer.out_c, icg, k, k)
        if layer.weights.shape != expect:
            raise ModelError(f"{layer.name}: weights {layer.weights.shape} != {expect}")
    if layer.kind == "head":
        if layer.anchors is None or layer.out_c != len(layer.anchors) * OUTPUTS_PER_ANCHOR:
            raise ModelError(f"{layer.name}: head needs {OUTPUTS_PER_ANCHOR} outputs per anchor")
    return (layer.out_c, oh, ow)


def layer_macs(layer: Layer, ins: list[tuple[int, int, int]], out: tuple[int, int, int]) -> int:
    oc, oh, ow = out
    if layer.kind in ("conv", "head"):
        return oh * ow * oc * ins[0][0] * layer.kernel**2
    if layer.kind == "dwconv":
        return oh * ow * oc * layer.kernel**2
    return 0


@dataclass
class ForwardResult:
    heads: list[QuantizedTensor]
    macs: int

    def head_logits(self) -> list[np.ndarray]:
        return [dequantize(h) for h in self.heads]


def quantize_input(img: RgbImage, scale: float = INPUT_SCALE) -> QuantizedTensor:
    x = img.planes.astype(np.float64) / 255.0
    return quantize(x, QuantParams.per_tensor(scale))


def _maxpool(x: np.ndarray, k: int, s: int, p: int) -> np.ndarray:
    lo = np.iinfo(x.dtype).min
    xp = np.pad(x, ((0, 0), (p, p), (p, p)), constant_values=lo)
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]
    oh = (x.shape[1] + 2 * p - k) // s + 1
    ow = (x.shape[2] + 2 * p - k) // s + 1
    return win[:, :oh, :ow].max(axis=(3, 4))


def _upsample(x: np.ndarray, s: int) -> np.ndarray:
    return x.repeat(s, axis=1).repeat(s, axis=2)


def run_layer(layer: Layer, ins: list[QuantizedTensor]) -> QuantizedTensor:
    out_q = QuantParams.per_tensor(layer.out_scale)
    if layer.kind in ("conv", "dwconv", "head"):
        groups = ins[0].shape[0] if layer.kind == "dwconv" else 1
        return conv2d_int8(
            ins[0], layer.weights, layer.bias, out_q,
            stride=layer.stride, pad=layer.pad, relu=layer.relu, groups=groups,
        )
    if layer.kind == "maxpool":
        return QuantizedTensor(_maxpool(ins[0].data, layer.kernel, layer.stride, layer.pad), ins[0].qparams)
    if layer.kind == "upsample":
        return QuantizedTensor(_upsample(ins[0].data, layer.stride), ins[0].qparams)
    # concat: bring every input onto the layer's scale first
    parts = [requantize_tensor(t, out_q).data for t in ins]
    return QuantizedTensor(np.concatenate(parts, axis=0), out_q)


def forward(model: MicroModel, img: RgbImage) -> ForwardResult:
    """Integer forward pass. Returns the int8 head tensors and the MAC count."""
    if img.width != model.input_side or img.height != model.input_side:
        raise ModelError(
            f"image is {img.width}x{img.height}, model expects {model.input_side}x{model.input_side}"
        )
    x = quantize_input(img, model.input_scale)
    outs: list[QuantizedTensor] = []
    for layer in model.layers:
        ins = [x if i == -1 else outs[i] for i in layer.inputs]
        outs.append(run_layer(layer, ins))
    return ForwardResult([outs[i] for i in model.head_indices], model.mac_count())


# --- float reference path (dequantized weights, no activation rounding) ---

def _conv_float(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int, groups: int) -> np.ndarray:
    oc, icg, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    oh = (x.shape[1] + 2 * pad - k) // stride + 1
    ow = (x.shape[2] + 2 * pad - k) // stride + 1
    win = win[:, :oh, :ow]
    if groups == 1:
        y = np.einsum("cyxij,ocij->oyx", win, w, optimize=True)
    else:
        y = np.einsum("cyxij,cij->cyx", win, w[:, 0])
    return y + b[:, None, None]


def forward_reference(model: MicroModel, x: np.ndarray, float_bias: list[np.ndarray] | None = None) -> list[np.ndarray]:
    """Float forward on dequantized weights; returns every layer's activation.

    ``x`` is the (3, side, side) input in [0, 1]. Biases are taken from
    ``float_bias`` when given, else dequantized from the int32 biases.
    """
    outs: list[np.ndarray] = []
    scale_in = {-1: model.input_scale}
    for idx, layer in enumerate(model.layers):
        ins = [x if i == -1 else outs[i] for i in layer.inputs]
        if layer.kind in ("conv", "dwconv", "head"):
            w = dequantize(layer.weights)
            if float_bias is not None:
                b = float_bias[idx]
            elif layer.bias is None:
                b = np.zeros(layer.out_c)
            else:
                src_scale = scale_in[layer.inputs[0]]
                b = layer.bias.astype(np.float64) * src_scale * np.broadcast_to(layer.weights.qparams.scales, (layer.out_c,))
            groups = ins[0].shape[0] if layer.kind == "dwconv" else 1
            y = _conv_float(ins[0], w, b, layer.stride, layer.pad, groups)
            if layer.relu:
                y = np.maximum(y, 0)
        elif layer.kind == "maxpool":
            p = layer.pad
            xp = np.pad(ins[0], ((0, 0), (p, p), (p, p)), constant_values=-np.inf)
            y = _maxpool_float(xp, layer.kernel, layer.stride, ins[0].shape, p)
        elif layer.kind == "upsample":
            y = _upsample(ins[0], layer.stride)
        else:
            y = np.concatenate(ins, axis=0)
        outs.append(y)
        scale_in[idx] = layer.out_scale
    return outs


def _maxpool_float(xp: np.ndarray, k: int, s: int, shape, p: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]
    oh = (shape[1] + 2 * p - k) // s + 1
    ow = (shape[2] + 2 * p - k) // s + 1
    return win[:, :oh, :ow].max(axis=(3, 4))


# --- shipped architecture ---

# (kind, name, inputs, out_c, kernel, stride, relu)
MICRO_YOLO_ARCH = (
    ("conv", "stem", (-1,), 16, 3, 2, True),
    ("conv", "down1", (0,), 32, 3, 2, True),
    ("conv", "down2", (1,), 64, 3, 2, True),
    ("conv", "down3", (2,), 128, 3, 2, True),
    ("conv", "down4", (3,), 128, 3, 2, True),
    ("head", "head_p5", (4,), 18, 1, 1, False),
    ("upsample", "up", (4,), 128, 1, 2, False),
    ("concat", "cat", (6, 3), 256, 1, 1, False),
    ("conv", "neck_reduce", (7,), 64, 1, 1, True),
    ("conv", "neck", (8,), 64, 3, 1, True),
    ("head", "head_p4", (9,), 18, 1, 1, False),
)

# fractions of the input side; three priors per head
ANCHOR_FRACTIONS = {
    "head_p4": ((0.04, 0.05), (0.07, 0.08), (0.11, 0.12)),
    "head_p5": ((0.16, 0.17), (0.24, 0.26), (0.36, 0.38)),
}

def _he_weights(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = int(np.prod(shape[1:]))
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def build_micro_model(
    input_side: int = 192,
    seed: int = 0,
    calibration_images: int = 4,
    arch=MICRO_YOLO_ARCH,
) -> MicroModel:
    """Randomly initialised, PTQ-calibrated micro detector.

    Conv biases start at zero and objectness biases at a YOLO-style low prior,
    so a black frame produces no detections.
    """
    if input_side % 32:
        raise ModelError("input side must be a multiple of 32")
    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    float_w: list[np.ndarray | None] = []
    float_b: list[np.ndarray] = []
    chans: list[int] = []
    for kind, name, inputs, out_c, k, s, relu in arch:
        in_c = sum(3 if i == -1 else chans[i] for i in inputs)
        anchors = None
        w = b = None
        if kind in ("conv", "head", "dwconv"):
            icg = 1 if kind == "dwconv" else in_c
            w = _he_weights(rng, (out_c, icg, k, k))
            b = np.zeros(out_c)
        if kind == "head":
            anchors = np.array(ANCHOR_FRACTIONS[name]) * input_side
            w *= 0.1
            # ~8 objects per 640x640 frame spread over the head's cells
            cells = (640 / (16 if name.endswith("p4") else 32)) ** 2
            b.reshape(-1, OUTPUTS_PER_ANCHOR)[:, 4] = np.log(8.0 / cells)
        pad = k // 2 if kind in ("conv", "dwconv", "head") else 0
        layers.append(Layer(kind, name, inputs, out_c, k, s, pad, relu, anchors=anchors))
        float_w.append(w)
        float_b.append(b if b is not None else np.zeros(out_c))
        chans.append(out_c)

    # weights: per-channel max-abs
    for layer, w in zip(layers, float_w):
        if w is not None:
            layer.weights = quantize(w, calibrate(w, Granularity.PER_CHANNEL))
    model = MicroModel(input_side, layers)

    # activations: per-tensor max-abs over representative frames
    maxabs = np.zeros(len(layers))
    for img in representative_inputs(input_side, calibration_images, rng):
        acts = forward_reference(model, img, float_bias=float_b)
        maxabs = np.maximum(maxabs, [np.max(np.abs(a)) for a in acts])
    scales = {-1: model.input_scale}
    for idx, layer in enumerate(layers):
        layer.out_scale = float(max(maxabs[idx] / 127, 1e-12))
        if layer.kind in ("upsample", "maxpool"):
            layer.out_scale = scales[layer.inputs[0]]
        if layer.has_weights:
            src = scales[layer.inputs[0]]
            layer.bias = quantize_bias(float_b[idx], src, layer.weights.qparams.scales)
        scales[idx] = layer.out_scale
    return MicroModel(input_side, layers)


def representative_inputs(side: int, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Smooth synthetic frames in [0, 1] used for activation calibration."""
    imgs = []
    yy, xx = np.mgrid[0:side, 0:side] / side
    for _ in range(n):
        base = rng.uniform(0.2, 0.8, size=(3, 1, 1))
        fx, fy = rng.uniform(1, 6, size=2)
        wave = 0.2 * np.sin(2 * np.pi * (fx * xx + fy * yy))[None]
        noise = rng.normal(0, 0.05, size=(3, side, side))
        imgs.append(np.clip(base + wave + noise, 0, 1))
    return imgs


def zero_model_like(model: MicroModel) -> MicroModel:
    """Copy of ``model`` with every weight and bias set to zero."""
    layers = []
    for l in model.layers:
        w = None
        if l.weights is not None:
            w = QuantizedTensor(np.zeros_like(l.weights.data), l.weights.qparams)
        b = None if l.bias is None else np.zeros_like(l.bias)
        layers.append(replace(l, weights=w, bias=b))
    return MicroModel(model.input_side, layers, model.input_scale)


def build_planted_model(input_side: int = 64, cell: int = 8, threshold: float = 0.6, gain: float = 20.0) -> MicroModel:
    """Hand-set detector that fires on every cell whose brightest pixel is near white.

    Grey level (mean of RGB) is max-pooled over ``cell``-sized blocks; the head's
    objectness logit is ``gain * (pooled - threshold)`` and its box logits are
    zero, so each firing cell yields one box of side ``cell`` centred on the
    cell. Used as a fixture where the expected detections are known exactly.
    """
    if input_side % cell:
        raise ModelError("input side must be a multiple of the cell size")
    grey_w = np.full((1, 3, 1, 1), 1.0 / 3.0)
    head_w = np.zeros((OUTPUTS_PER_ANCHOR, 1, 1, 1))
    head_w[4] = gain
    head_b = np.zeros(OUTPUTS_PER_ANCHOR)
    head_b[4] = -gain * threshold
    grey_scale = 1.0 / 127
    head_scale = gain * max(threshold, 1.0 - threshold) / 127
    grey = Layer("conv", "grey", (-1,), 1, 1, 1, 0, True,
                 weights=quantize(grey_w, calibrate(grey_w, Granularity.PER_CHANNEL)),
                 out_scale=grey_scale)
    grey.bias = quantize_bias(np.zeros(1), INPUT_SCALE, grey.weights.qparams.scales)
    pool = Layer("maxpool", "pool", (0,), 1, cell, cell, 0, False, out_scale=grey_scale)
    hq = quantize(head_w, calibrate(head_w, Granularity.PER_CHANNEL))
    head = Layer("head", "head", (1,), OUTPUTS_PER_ANCHOR, 1, 1, 0, False,
                 weights=hq, bias=quantize_bias(head_b, grey_scale, hq.qparams.scales),
                 out_scale=head_scale, anchors=np.array([[float(cell), float(cell)]]))
    return MicroModel(input_side, [grey, pool, head])
