"""Desk-scale version of the on-node vision pipeline.

raw Bayer frame -> demosaic -> white balance -> downscale -> INT8 detector
-> decode -> NMS -> occupancy count
"""

from __future__ import annotations

from dataclasses import dataclass

from .image import (
    ImageError,
    RawBayerImage,
    RgbImage,
    auto_white_balance,
    debayer,
    downscale,
    preprocess,
)
from .model import MicroModel, ModelError, build_micro_model, forward
from .postprocess import (
    DEFAULT_CONF_THRESHOLD,
    DEFAULT_IOU_THRESHOLD,
    DetectionBox,
    count_occupancy,
    decode,
    iou,
    nms,
)
from .quant import (
    Granularity,
    QuantizedTensor,
    QuantParams,
    calibrate,
    conv2d_int8,
    dequantize,
    quantize,
)


@dataclass
class PipelineResult:
    boxes: list[DetectionBox]
    count: int
    macs: int


def detect(
    raw: RawBayerImage,
    model: MicroModel,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> PipelineResult:
    img = preprocess(raw, model.input_side)
    result = forward(model, img)
    anchors = [model.layers[i].anchors for i in model.head_indices]
    boxes = decode(result.head_logits(), anchors, model.head_strides(), model.input_side, conf_threshold)
    kept = nms(boxes, iou_threshold)
    return PipelineResult(kept, count_occupancy(kept), result.macs)


__all__ = [
    "DEFAULT_CONF_THRESHOLD",
    "DEFAULT_IOU_THRESHOLD",
    "DetectionBox",
    "Granularity",
    "ImageError",
    "MicroModel",
    "ModelError",
    "PipelineResult",
    "QuantParams",
    "QuantizedTensor",
    "RawBayerImage",
    "RgbImage",
    "auto_white_balance",
    "build_micro_model",
    "calibrate",
    "conv2d_int8",
    "count_occupancy",
    "debayer",
    "decode",
    "dequantize",
    "detect",
    "downscale",
    "forward",
    "iou",
    "nms",
    "preprocess",
    "quantize",
]
